#include "wikitox/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "wikitox/abm.hpp"
#include "wikitox/activity.hpp"
#include "wikitox/comment_extract.hpp"
#include "wikitox/config.hpp"
#include "wikitox/dump_ingest.hpp"
#include "wikitox/hash.hpp"
#include "wikitox/leaving.hpp"
#include "wikitox/loss_estimator.hpp"
#include "wikitox/pipeline_io.hpp"
#include "wikitox/svg_plot.hpp"
#include "wikitox/toxicity.hpp"

namespace wikitox {

namespace {

namespace fs = std::filesystem;
using io::json;

// Raised for bad flag combinations discovered after parsing.
class UsageError : public Error {
public:
    using Error::Error;
};

Instant now() { return std::chrono::floor<Seconds>(std::chrono::system_clock::now()); }

std::string absolute_path(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

struct Stage {
    io::RunManifest manifest;

    Stage(std::string name, const Config& config, std::uint64_t seed) {
        manifest.stage = std::move(name);
        manifest.config = config.snapshot();
        manifest.seed = seed;
        manifest.started = now();
    }

    void input(const fs::path& p) { manifest.inputs[absolute_path(p)] = sha256_file(p); }

    fs::path finish(std::vector<fs::path> outputs) {
        for (auto& o : outputs) o = absolute_path(o);
        manifest.finished = now();
        return io::write_manifest(manifest, outputs);
    }
};

struct Common {
    std::optional<std::string> config_path;
};

Config resolve_config(const Common& common) {
    Config config = common.config_path ? load_config(*common.config_path) : Config{};
    apply_environment(config);
    return config;
}

template <typename T>
void override_with(T& target, const std::optional<T>& value) {
    if (value) target = *value;
}

std::set<std::string> read_bot_list(const fs::path& path) {
    std::set<std::string> bots;
    std::istringstream in(io::read_text(path));
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        bots.insert(line.substr(b, e - b + 1));
    }
    return bots;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// ---- scan ----

struct ScanArgs {
    std::string dump;
    std::string out;
    std::optional<std::string> contribs_out;
    std::string compression = "auto";
    bool all_pages = false;
    bool no_subpages = false;
};

Compression parse_compression(const std::string& s) {
    if (s == "auto") return Compression::detect;
    if (s == "none") return Compression::none;
    if (s == "bzip2") return Compression::bzip2;
    throw UsageError("--compression must be auto, none or bzip2");
}

int run_scan(const ScanArgs& a, const Common& common, std::ostream& out, std::ostream& err) {
    Config config = resolve_config(common);
    if (a.no_subpages) config.include_talk_subpages = false;
    Stage stage("scan", config, 0);
    stage.input(a.dump);
    stage.manifest.config["all_pages"] = a.all_pages;

    DumpReader reader(a.dump, parse_compression(a.compression));
    io::NdjsonWriter pages(a.out, io::Schema::pages);
    std::map<std::string, std::vector<Instant>> contributions;
    std::size_t total = 0;
    std::size_t talk = 0;
    const TalkPageFilter filter{config.include_talk_subpages};
    while (auto page = reader.next()) {
        ++total;
        PageHistory sorted = sort_history(std::move(*page));
        if (a.contribs_out) {
            for (const auto& rev : sorted.revisions) {
                if (rev.contributor.is_registered()) contributions[rev.contributor.name].push_back(rev.timestamp);
            }
        }
        bool user_talk = is_user_talk(sorted, reader.site_info(), filter);
        if (user_talk) ++talk;
        if (!user_talk && !a.all_pages) continue;
        json record = io::to_json(sorted);
        record["user_talk"] = user_talk;
        pages.write(std::move(record));
    }
    pages.close();
    for (const auto& w : reader.warnings()) err << "warning: " << w << "\n";

    std::vector<fs::path> outputs{a.out};
    if (a.contribs_out) {
        std::vector<ContributionLog> logs;
        logs.reserve(contributions.size());
        for (auto& [user, times] : contributions) logs.push_back(ContributionLog::make(user, std::move(times)));
        io::write_contribs(*a.contribs_out, logs);
        outputs.emplace_back(*a.contribs_out);
    }
    stage.finish(outputs);
    out << "scanned " << total << " pages, " << talk << " user-talk, wrote " << pages.count() << " records\n";
    return kExitOk;
}

// ---- extract ----

struct ExtractArgs {
    std::optional<std::string> dump;
    std::optional<std::string> pages;
    std::string out;
    std::optional<std::string> bots;
    bool keep_anonymous = false;
    bool keep_self = false;
    bool no_bot_suffix = false;
    bool no_subpages = false;
};

int run_extract(const ExtractArgs& a, const Common& common, std::ostream& out, std::ostream& err) {
    if (a.dump.has_value() == a.pages.has_value()) throw UsageError("extract needs exactly one of --dump or --pages");
    Config config = resolve_config(common);
    if (a.keep_anonymous) config.exclude_anonymous = false;
    if (a.keep_self) config.exclude_self = false;
    if (a.no_bot_suffix) config.bot_suffix_heuristic = false;
    if (a.no_subpages) config.include_talk_subpages = false;
    ExclusionConfig exclusions = config.exclusions();

    Stage stage("extract", config, 0);
    if (a.bots) {
        auto listed = read_bot_list(*a.bots);
        exclusions.bot_usernames.insert(listed.begin(), listed.end());
        stage.input(*a.bots);
        stage.manifest.config["bots"] = std::vector<std::string>(exclusions.bot_usernames.begin(),
                                                                 exclusions.bot_usernames.end());
    }

    io::NdjsonWriter writer(a.out, io::Schema::comments);
    std::size_t pages = 0;
    auto emit = [&](const PageHistory& page) {
        ++pages;
        for (const auto& c : extract_comments(page, exclusions)) writer.write(io::to_json(c));
    };
    if (a.dump) {
        stage.input(*a.dump);
        DumpReader reader(*a.dump, Compression::detect);
        const TalkPageFilter filter{config.include_talk_subpages};
        while (auto page = reader.next()) {
            if (is_user_talk(*page, reader.site_info(), filter)) emit(sort_history(std::move(*page)));
        }
        for (const auto& w : reader.warnings()) err << "warning: " << w << "\n";
    } else {
        stage.input(*a.pages);
        io::for_each_record(*a.pages, io::Schema::pages, [&](const json& j, std::size_t) {
            if (!j.value("user_talk", true)) return;
            PageHistory page = io::page_from_json(j);
            if (!config.include_talk_subpages && page.title.find('/') != std::string::npos) return;
            emit(sort_history(std::move(page)));
        });
    }
    writer.close();
    stage.finish({a.out});
    out << "extracted " << writer.count() << " comments from " << pages << " user-talk pages\n";
    return kExitOk;
}

// ---- score ----

struct ScoreArgs {
    std::string in;
    std::string out;
    std::optional<std::string> lang;
    std::string backend = "mock";
    std::optional<double> rate;
    std::optional<std::string> cache;
    std::optional<std::string> lexicon;
    std::optional<std::string> endpoint;
    std::optional<unsigned> parallelism;
    std::string scorer_id = "perspective-v1alpha1";
};

int run_score(const ScoreArgs& a, const Common& common, std::ostream& out, std::ostream&) {
    Config config = resolve_config(common);
    override_with(config.language, a.lang);
    override_with(config.rate_limit, a.rate);
    override_with(config.remote_endpoint, a.endpoint);
    override_with(config.parallelism, a.parallelism);
    override_with(config.cache_path, a.cache);
    config.validate();
    Language lang = parse_language(config.language);

    Stage stage("score", config, 0);
    stage.input(a.in);
    auto comments = io::read_comments(a.in);

    std::unique_ptr<Scorer> scorer;
    double rate = 0.0;
    if (a.backend == "mock") {
        if (a.lexicon) {
            stage.input(*a.lexicon);
            scorer = std::make_unique<LexiconScorer>(LexiconScorer::from_file(*a.lexicon));
        } else {
            scorer = std::make_unique<LexiconScorer>();
        }
    } else if (a.backend == "remote") {
        if (config.api_key.empty()) {
            throw DataError(std::string("remote backend needs an API key (config api_key or $") + kApiKeyEnv + ")");
        }
        scorer = std::make_unique<RemoteScorer>(RemoteScorerOptions{config.remote_endpoint, config.api_key});
        rate = config.rate_limit;
    } else if (a.backend == "cache") {
        if (config.cache_path.empty()) throw UsageError("--backend cache needs --cache FILE");
        scorer = std::make_unique<CachedOnlyScorer>(a.scorer_id);
    } else {
        throw UsageError("--backend must be remote, mock or cache");
    }
    stage.manifest.config["backend"] = a.backend;
    stage.manifest.config["scorer"] = scorer->id();

    auto cache = config.cache_path.empty() ? std::make_shared<ScoreCache>()
                                           : std::make_shared<ScoreCache>(fs::path(config.cache_path));
    ScoringClient client(*scorer, lang, cache, RetryPolicy{}, rate);
    CorpusReport report;
    unsigned parallelism = scorer->is_remote() ? config.parallelism : 1;
    auto scored = score_corpus(comments, client, report, parallelism);
    io::write_scored(a.out, scored);
    stage.finish({a.out});
    out << report.summary() << "\n";
    return kExitOk;
}

// ---- activity ----

struct ActivityArgs {
    std::string contribs;
    std::string out;
};

int run_activity(const ActivityArgs& a, const Common& common, std::ostream& out, std::ostream&) {
    Config config = resolve_config(common);
    Stage stage("activity", config, 0);
    stage.input(a.contribs);
    auto logs = io::read_contribs(a.contribs);
    std::vector<ActivityVector> vectors;
    vectors.reserve(logs.size());
    std::size_t skipped = 0;
    for (const auto& log : logs) {
        if (log.empty()) {
            ++skipped;
            continue;
        }
        vectors.push_back(to_active_days(log));
    }
    io::write_activity_vectors(a.out, vectors);
    stage.finish({a.out});
    out << "wrote " << vectors.size() << " activity vectors";
    if (skipped) out << " (" << skipped << " users without contributions skipped)";
    out << "\n";
    return kExitOk;
}

// ---- analyze-loss ----

struct LossArgs {
    std::string scored;
    std::string contribs;
    std::string out;
    std::optional<double> threshold;
    std::optional<std::uint64_t> seed;
    std::optional<int> repetitions;
    std::optional<int> bootstrap;
    std::optional<std::string> center_on;
    bool symmetric_days = false;
    bool include_toxic_recipients = false;
    bool sweep = false;
    std::optional<std::string> plot;
    std::optional<std::string> plot_sweep;
};

std::string profile_chart(const LossAnalysis& a, double threshold) {
    plot::LineChart chart;
    chart.title = "Activity around a comment (threshold " + fixed(threshold, 2) + ")";
    chart.x_label = "days from comment";
    chart.y_label = "fraction of users active";
    chart.vertical_marker = 0.0;
    auto series = [&](std::string label, const std::vector<double>& ys, std::string color, bool dashed) {
        plot::Series s;
        s.label = std::move(label);
        s.color = std::move(color);
        s.dashed = dashed;
        for (std::size_t i = 0; i < ys.size(); ++i) {
            s.x.push_back(static_cast<double>(static_cast<int>(i) - kWindowRadius));
            s.y.push_back(ys[i]);
        }
        chart.series.push_back(std::move(s));
    };
    series("toxic", a.toxic_profile, "#d62728", false);
    series("control", a.control_profile, "#1f77b4", false);
    series("shuffled", a.shuffled_profile, "#7f7f7f", true);
    return plot::render(chart);
}

std::string sweep_heatmap(const SweepGrid& grid) {
    plot::Heatmap map;
    map.title = "Active days lost across thresholds and activity filters";
    map.row_label = "toxicity threshold";
    map.column_label = "minimum active days before the comment";
    for (double t : grid.thresholds) map.rows.push_back(fixed(t, 1));
    for (int x : grid.activity_filters) map.columns.push_back(std::to_string(x));
    for (const auto& cell : grid.cells) {
        map.values.push_back(cell.estimate ? std::optional<double>(cell.estimate->delta) : std::nullopt);
    }
    return plot::render(map);
}

int run_analyze_loss(const LossArgs& a, const Common& common, std::ostream& out, std::ostream& err) {
    Config config = resolve_config(common);
    override_with(config.threshold, a.threshold);
    override_with(config.seed, a.seed);
    override_with(config.repetitions, a.repetitions);
    override_with(config.bootstrap_resamples, a.bootstrap);
    override_with(config.center_on, a.center_on);
    if (a.symmetric_days) config.symmetric_days = true;
    if (a.include_toxic_recipients) config.control_excludes_toxic_recipients = false;
    config.validate();

    Stage stage("analyze-loss", config, config.seed);
    stage.input(a.scored);
    stage.input(a.contribs);
    auto scored = io::read_scored(a.scored);
    auto logs = io::read_contribs(a.contribs);
    CohortBuildReport build;
    auto users = build_user_records(scored, logs, &build);

    LossConfig loss = config.loss();
    LossAnalysis analysis = analyze_loss(users, loss);
    if (!analysis.matching_within_tolerance) {
        err << "warning: control pre-window mean " << analysis.control_pre_mean << " differs from toxic "
            << analysis.toxic_pre_mean << " by more than " << config.matching_tolerance << "\n";
    }

    json result = {{"threshold", config.threshold},
                   {"seed", config.seed},
                   {"repetitions", config.repetitions},
                   {"cohort", {{"users", build.users},
                               {"recipients_without_contributions", build.recipients_without_contributions}}},
                   {"analysis", io::to_json(analysis)}};
    std::optional<SweepGrid> grid;
    if (a.sweep || a.plot_sweep) {
        auto thresholds = default_sweep_thresholds();
        auto filters = default_activity_filters();
        grid = robustness_sweep(users, thresholds, filters, loss);
        result["sweep"] = io::to_json(*grid);
    }
    io::write_text(a.out, io::dump_pretty(result));
    std::vector<fs::path> outputs{a.out};
    if (a.plot) {
        io::write_text(*a.plot, profile_chart(analysis, config.threshold));
        outputs.emplace_back(*a.plot);
    }
    if (a.plot_sweep) {
        io::write_text(*a.plot_sweep, sweep_heatmap(*grid));
        outputs.emplace_back(*a.plot_sweep);
    }
    stage.finish(outputs);
    const auto& e = analysis.estimate;
    out << "delta " << fixed(e.delta, 3) << " active days (95% CI " << fixed(e.ci_low, 3) << " to "
        << fixed(e.ci_high, 3) << ", p " << e.p_value << "), toxic users " << e.n_toxic << ", control "
        << e.n_control << "\n";
    return kExitOk;
}

// ---- analyze-leaving ----

struct LeavingArgs {
    std::string scored;
    std::string contribs;
    std::string out;
    std::optional<double> threshold;
    std::optional<int> censor_days;
    std::optional<int> bootstrap;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> dataset_end;
    std::optional<std::string> plot;
};

std::string leaving_chart(const LeavingAnalysis& a) {
    plot::LineChart chart;
    chart.title = "Probability of leaving after the N-th contribution";
    chart.x_label = "N";
    chart.y_label = "P(leave)";
    chart.log_x = true;
    chart.log_y = true;
    auto add = [&](const LeaveCurve& c, std::string label, std::string color) {
        plot::Series s;
        s.label = label;
        s.color = color;
        s.markers = true;
        bool bands = std::any_of(c.ci.begin(), c.ci.end(), [](const auto& i) { return i.has_value(); });
        for (int n = 1; n <= kMaxRank; ++n) {
            auto i = static_cast<std::size_t>(n - 1);
            s.x.push_back(n);
            s.y.push_back(c.probability[i] ? *c.probability[i] : NAN);
            if (bands) {
                s.y_low.push_back(c.ci[i] ? c.ci[i]->low : NAN);
                s.y_high.push_back(c.ci[i] ? c.ci[i]->high : NAN);
            }
        }
        chart.series.push_back(std::move(s));
        if (c.fit) {
            plot::Series f;
            f.label = label + " fit (alpha " + fixed(c.fit->alpha, 2) + ")";
            f.color = color;
            f.dashed = true;
            for (int n = 1; n <= kMaxRank; ++n) {
                f.x.push_back(n);
                f.y.push_back(c.fit->c * std::pow(n, -c.fit->alpha));
            }
            chart.series.push_back(std::move(f));
        }
    };
    add(a.toxic, "toxic-followed", "#d62728");
    add(a.other, "other", "#1f77b4");
    return plot::render(chart);
}

int run_analyze_leaving(const LeavingArgs& a, const Common& common, std::ostream& out, std::ostream&) {
    Config config = resolve_config(common);
    override_with(config.threshold, a.threshold);
    override_with(config.censor_days, a.censor_days);
    override_with(config.bootstrap_resamples, a.bootstrap);
    override_with(config.seed, a.seed);
    config.validate();
    LeavingConfig leaving = config.leaving();
    if (a.dataset_end) leaving.dataset_end = parse_instant(*a.dataset_end);

    Stage stage("analyze-leaving", config, config.seed);
    stage.input(a.scored);
    stage.input(a.contribs);
    if (leaving.dataset_end) stage.manifest.config["dataset_end"] = format_instant(*leaving.dataset_end);
    auto scored = io::read_scored(a.scored);
    auto logs = io::read_contribs(a.contribs);
    LeavingAnalysis analysis = analyze_leaving(logs, scored, leaving);

    json result = io::to_json(analysis);
    result["threshold"] = config.threshold;
    result["censor_days"] = config.censor_days;
    io::write_text(a.out, io::dump_pretty(result));
    std::vector<fs::path> outputs{a.out};
    if (a.plot) {
        io::write_text(*a.plot, leaving_chart(analysis));
        outputs.emplace_back(*a.plot);
    }
    stage.finish(outputs);
    auto describe = [&](const LeaveCurve& c) {
        std::ostringstream s;
        auto p1 = c.p(1);
        s << cohort_name(c.cohort) << ": P_1 " << (p1 ? fixed(*p1, 3) : std::string("n/a"));
        s << ", alpha " << (c.fit ? fixed(c.fit->alpha, 3) : std::string("n/a"));
        return s.str();
    };
    out << describe(analysis.toxic) << "; " << describe(analysis.other) << "; disjoint CIs at "
        << analysis.significance.disjoint.size() << " of " << analysis.significance.compared.size() << " N\n";
    return kExitOk;
}

// ---- simulate ----

struct SimulateArgs {
    std::string curves;
    std::optional<std::string> lambda_from;
    std::optional<double> lambda;
    std::string scenario = "all";
    std::optional<int> replicates;
    std::optional<std::uint64_t> seed;
    std::optional<int> horizon;
    std::optional<double> toxic_factor;
    std::string out;
    std::optional<std::string> plot;
};

std::string population_chart(const std::vector<ScenarioSummary>& runs) {
    plot::LineChart chart;
    chart.title = "Editor population over time";
    chart.x_label = "day";
    chart.y_label = "active users";
    for (const auto& r : runs) {
        plot::Series s;
        s.label = "scenario " + std::to_string(r.scenario) + " " + std::string(environment_name(r.environment));
        s.color = r.environment == Environment::toxic ? "#d62728" : "#1f77b4";
        s.dashed = r.scenario == 2;
        for (std::size_t d = 0; d < r.mean_population.size(); ++d) {
            s.x.push_back(static_cast<double>(d));
            s.y.push_back(r.mean_population[d]);
            s.y_low.push_back(r.mean_population[d] - r.std_population[d]);
            s.y_high.push_back(r.mean_population[d] + r.std_population[d]);
        }
        chart.series.push_back(std::move(s));
    }
    return plot::render(chart);
}

int run_simulate(const SimulateArgs& a, const Common& common, std::ostream& out, std::ostream& err) {
    if (a.lambda.has_value() == a.lambda_from.has_value()) {
        throw UsageError("simulate needs exactly one of --lambda or --lambda-from");
    }
    Config config = resolve_config(common);
    override_with(config.replicates, a.replicates);
    override_with(config.sim_seed, a.seed);
    override_with(config.horizon, a.horizon);
    config.validate();

    RunOptions options;
    options.horizon = config.horizon;
    if (a.scenario == "all") {
        options.scenarios = {1, 2, 3};
    } else if (a.scenario == "1" || a.scenario == "2" || a.scenario == "3") {
        options.scenarios = {std::stoi(a.scenario)};
    } else {
        throw UsageError("--scenario must be 1, 2, 3 or all");
    }

    Stage stage("simulate", config, config.sim_seed);
    stage.input(a.curves);
    json curves = io::read_json(a.curves);
    if (!curves.contains("cohorts")) throw DataError(a.curves + ": no \"cohorts\" object");
    LeaveCurve other = io::leave_curve_from_json(curves["cohorts"].at("other"));
    EnvironmentCurve nontoxic = EnvironmentCurve::from_leave_curve(other, Environment::non_toxic);
    EnvironmentCurve toxic;
    if (a.toxic_factor) {
        toxic = nontoxic.scaled(*a.toxic_factor, Environment::toxic);
        stage.manifest.config["toxic_environment"] = "scaled x" + fixed(*a.toxic_factor, 3);
    } else {
        LeaveCurve tc = io::leave_curve_from_json(curves["cohorts"].at("toxic_followed"));
        if (!tc.fit) {
            throw DataError("toxic-followed curve has too few points to fit; pass --toxic-factor to scale the other curve");
        }
        toxic = EnvironmentCurve::from_leave_curve(tc, Environment::toxic);
        stage.manifest.config["toxic_environment"] = "toxic_followed curve";
    }

    double lambda = 0.0;
    if (a.lambda) {
        lambda = *a.lambda;
    } else {
        stage.input(*a.lambda_from);
        lambda = estimate_lambda(io::read_contribs(*a.lambda_from));
    }
    stage.manifest.config["lambda"] = lambda;

    auto runs = run_scenarios(toxic, nontoxic, lambda, static_cast<std::size_t>(config.replicates), config.sim_seed,
                              options);
    std::ostringstream csv;
    csv << "scenario,environment,day,mean_population,std_population\n";
    for (const auto& r : runs) {
        for (std::size_t d = 0; d < r.mean_population.size(); ++d) {
            csv << r.scenario << ',' << environment_name(r.environment) << ',' << d << ','
                << fixed(r.mean_population[d], 4) << ',' << fixed(r.std_population[d], 4) << '\n';
        }
    }
    io::write_text(a.out, csv.str());
    std::vector<fs::path> outputs{a.out};
    if (a.plot) {
        io::write_text(*a.plot, population_chart(runs));
        outputs.emplace_back(*a.plot);
    }
    stage.finish(outputs);
    out << "lambda " << fixed(lambda, 4) << " per day\n";
    for (const auto& r : runs) {
        out << "scenario " << r.scenario << ' ' << environment_name(r.environment) << ": population on day "
            << config.horizon << " " << fixed(r.mean_population.back(), 1) << "\n";
    }
    (void)err;
    return kExitOk;
}

// ---- report ----

struct ReportArgs {
    std::optional<std::string> dir;
    std::vector<std::string> manifests;
    std::string out;
};

std::size_t count_lines(const fs::path& p) {
    std::string text = io::read_text(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

std::string stage_summary(const io::RunManifest& m) {
    std::ostringstream s;
    if (m.outputs.empty()) return {};
    // primary output is the one the manifest is named after; prefer data files over plots
    std::vector<fs::path> outs;
    for (const auto& [path, hash] : m.outputs) outs.emplace_back(path);
    auto find_ext = [&](std::string_view ext) -> std::optional<fs::path> {
        for (const auto& p : outs) {
            if (p.extension() == ext) return p;
        }
        return std::nullopt;
    };
    try {
        if (m.stage == "scan" || m.stage == "extract" || m.stage == "score") {
            for (const auto& p : outs) s << "- " << p.filename().string() << ": " << count_lines(p) << " records\n";
        } else if (m.stage == "activity") {
            if (auto p = find_ext(".bin")) s << "- activity vectors: " << io::read_activity_vectors(*p).size() << "\n";
        } else if (m.stage == "analyze-loss") {
            if (auto p = find_ext(".json")) {
                json j = io::read_json(*p);
                const json& e = j["analysis"]["estimate"];
                s << "- threshold " << j["threshold"].get<double>() << "\n";
                s << "- delta " << fixed(e["delta"].get<double>(), 3) << " active days, 95% CI ["
                  << fixed(e["ci_low"].get<double>(), 3) << ", " << fixed(e["ci_high"].get<double>(), 3) << "]\n";
                s << "- p-value " << e["p_value"].get<double>() << "\n";
                s << "- toxic users " << e["n_toxic"].get<std::size_t>() << ", control users "
                  << e["n_control"].get<std::size_t>() << "\n";
                s << "- total loss " << fixed(e["total_loss_human_years"].get<double>(), 3) << " human-years\n";
                s << "- calibrated p " << j["analysis"]["calibration"]["p"].get<double>() << "\n";
            }
        } else if (m.stage == "analyze-leaving") {
            if (auto p = find_ext(".json")) {
                json j = io::read_json(*p);
                for (const char* cohort : {"toxic_followed", "other", "all"}) {
                    const json& c = j["cohorts"][cohort];
                    const json& p1 = c["points"][0]["p"];
                    s << "- " << cohort << ": P_1 " << (p1.is_null() ? std::string("n/a") : fixed(p1.get<double>(), 4));
                    if (!c["fit"].is_null()) {
                        s << ", alpha " << fixed(c["fit"]["alpha"].get<double>(), 4) << ", c "
                          << fixed(c["fit"]["c"].get<double>(), 4);
                    }
                    s << "\n";
                }
                s << "- disjoint intervals at " << j["significance"]["disjoint"].size() << " of "
                  << j["significance"]["compared"].size() << " ranks\n";
            }
        } else if (m.stage == "simulate") {
            if (auto p = find_ext(".csv")) {
                std::istringstream in(io::read_text(*p));
                std::string line;
                std::getline(in, line);
                std::map<std::string, std::string> last;
                while (std::getline(in, line)) {
                    auto c1 = line.find(',');
                    auto c2 = line.find(',', c1 + 1);
                    last[line.substr(0, c2)] = line;
                }
                for (const auto& [key, row] : last) s << "- final row " << row << "\n";
            }
        }
    } catch (const std::exception& e) {
        s << "- summary unavailable: " << e.what() << "\n";
    }
    return s.str();
}

int run_report(const ReportArgs& a, const Common&, std::ostream& out, std::ostream& err) {
    std::vector<fs::path> paths;
    for (const auto& m : a.manifests) paths.emplace_back(m);
    if (a.dir) {
        for (const auto& entry : fs::directory_iterator(*a.dir)) {
            const auto name = entry.path().filename().string();
            if (entry.is_regular_file() && name.size() > 14 && name.ends_with(".manifest.json")) {
                paths.push_back(entry.path());
            }
        }
    }
    if (paths.empty()) throw UsageError("report needs --dir or at least one --manifest");
    std::sort(paths.begin(), paths.end());
    paths.erase(std::unique(paths.begin(), paths.end()), paths.end());

    static const std::vector<std::string> order{"scan",          "extract",         "score",   "activity",
                                                "analyze-loss", "analyze-leaving", "simulate"};
    std::vector<io::RunManifest> manifests;
    for (const auto& p : paths) manifests.push_back(io::read_manifest(p));
    std::stable_sort(manifests.begin(), manifests.end(), [&](const auto& x, const auto& y) {
        auto rank = [&](const std::string& s) { return std::find(order.begin(), order.end(), s) - order.begin(); };
        return rank(x.stage) < rank(y.stage);
    });

    std::ostringstream doc;
    doc << "# Pipeline report\n\n";
    std::size_t failures = 0;
    for (const auto& m : manifests) {
        doc << "## " << m.stage << "\n\n";
        doc << "- tool version " << m.tool_version << ", seed " << m.seed << "\n";
        for (const auto& [path, hash] : m.inputs) {
            doc << "- input " << fs::path(path).filename().string() << " sha256 " << hash << "\n";
        }
        auto bad = io::verify_manifest(m);
        for (const auto& [path, hash] : m.outputs) {
            bool ok = std::find(bad.begin(), bad.end(), path) == bad.end();
            doc << "- output " << fs::path(path).filename().string() << " sha256 " << hash
                << (ok ? " (verified)" : " (MISMATCH)") << "\n";
        }
        failures += bad.size();
        doc << stage_summary(m) << "\n";
    }
    io::write_text(a.out, doc.str());
    if (failures > 0) {
        err << "error: " << failures << " file(s) no longer match their manifests\n";
        return kExitData;
    }
    out << "report covers " << manifests.size() << " stages\n";
    return kExitOk;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Toxic-comment impact analysis toolkit", "wikitox"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_option("--config", common.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    app.set_version_flag("--version", std::string(io::kToolVersion));

    ScanArgs scan;
    auto* scan_cmd = app.add_subcommand("scan", "Stream pages out of a MediaWiki XML dump");
    scan_cmd->add_option("--dump", scan.dump, "XML dump, plain or bzip2")->required()->check(CLI::ExistingFile);
    scan_cmd->add_option("--out", scan.out, "pages.ndjson output")->required();
    scan_cmd->add_option("--contribs-out", scan.contribs_out, "also write per-user edit timestamps");
    scan_cmd->add_option("--compression", scan.compression, "auto, none or bzip2")->capture_default_str();
    scan_cmd->add_flag("--all-pages", scan.all_pages, "keep pages outside the user-talk namespace");
    scan_cmd->add_flag("--no-subpages", scan.no_subpages, "drop user-talk subpages such as archives");

    ExtractArgs extract;
    auto* extract_cmd = app.add_subcommand("extract", "Recover comments as added text between revisions");
    extract_cmd->add_option("--dump", extract.dump, "XML dump")->check(CLI::ExistingFile);
    extract_cmd->add_option("--pages", extract.pages, "pages.ndjson from scan")->check(CLI::ExistingFile);
    extract_cmd->add_option("--out", extract.out, "comments.ndjson output")->required();
    extract_cmd->add_option("--bots", extract.bots, "file with one bot username per line")->check(CLI::ExistingFile);
    extract_cmd->add_flag("--keep-anonymous", extract.keep_anonymous, "keep comments by unregistered users");
    extract_cmd->add_flag("--keep-self", extract.keep_self, "keep comments by the page owner");
    extract_cmd->add_flag("--no-bot-suffix", extract.no_bot_suffix, "disable the username suffix heuristic");
    extract_cmd->add_flag("--no-subpages", extract.no_subpages, "drop user-talk subpages");

    ScoreArgs score;
    auto* score_cmd = app.add_subcommand("score", "Assign toxicity scores to comments");
    score_cmd->add_option("--in", score.in, "comments.ndjson")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--out", score.out, "scored.ndjson output")->required();
    score_cmd->add_option("--lang", score.lang, "language code (en, de, fr, es, it, ru)");
    score_cmd->add_option("--backend", score.backend, "remote, mock or cache")->capture_default_str();
    score_cmd->add_option("--rate", score.rate, "remote requests per second");
    score_cmd->add_option("--cache", score.cache, "persistent score cache file");
    score_cmd->add_option("--lexicon", score.lexicon, "lexicon file for the mock backend")->check(CLI::ExistingFile);
    score_cmd->add_option("--endpoint", score.endpoint, "remote comments:analyze URL");
    score_cmd->add_option("--parallelism", score.parallelism, "remote requests in flight");
    score_cmd->add_option("--scorer-id", score.scorer_id, "scorer whose cached scores the cache backend serves")
        ->capture_default_str();

    ActivityArgs activity;
    auto* activity_cmd = app.add_subcommand("activity", "Convert contribution timestamps to active-day bitsets");
    activity_cmd->add_option("--contribs", activity.contribs, "contribs.ndjson")->required()->check(CLI::ExistingFile);
    activity_cmd->add_option("--out", activity.out, "vectors.bin output")->required();

    LossArgs loss;
    auto* loss_cmd = app.add_subcommand("analyze-loss", "Estimate active days lost after a toxic comment");
    loss_cmd->add_option("--scored", loss.scored, "scored.ndjson")->required()->check(CLI::ExistingFile);
    loss_cmd->add_option("--contribs", loss.contribs, "contribs.ndjson")->required()->check(CLI::ExistingFile);
    loss_cmd->add_option("--out", loss.out, "delta.json output")->required();
    loss_cmd->add_option("--threshold", loss.threshold, "toxicity threshold");
    loss_cmd->add_option("--seed", loss.seed, "random seed");
    loss_cmd->add_option("--repetitions", loss.repetitions, "cohort redraws");
    loss_cmd->add_option("--bootstrap", loss.bootstrap, "bootstrap resamples");
    loss_cmd->add_option("--center-on", loss.center_on, "virtual_event or nearest_nontoxic_comment");
    loss_cmd->add_flag("--symmetric-days", loss.symmetric_days, "leave day 0 out, 100 days each side");
    loss_cmd->add_flag("--include-toxic-recipients", loss.include_toxic_recipients,
                       "allow users with toxic comments in the control pool");
    loss_cmd->add_flag("--sweep", loss.sweep, "add the threshold by activity-filter grid");
    loss_cmd->add_option("--plot", loss.plot, "before/after activity profile SVG");
    loss_cmd->add_option("--plot-sweep", loss.plot_sweep, "robustness grid SVG (implies --sweep)");

    LeavingArgs leaving;
    auto* leaving_cmd = app.add_subcommand("analyze-leaving", "Estimate the probability of leaving after N edits");
    leaving_cmd->add_option("--scored", leaving.scored, "scored.ndjson")->required()->check(CLI::ExistingFile);
    leaving_cmd->add_option("--contribs", leaving.contribs, "contribs.ndjson")->required()->check(CLI::ExistingFile);
    leaving_cmd->add_option("--out", leaving.out, "curves.json output")->required();
    leaving_cmd->add_option("--threshold", leaving.threshold, "toxicity threshold");
    leaving_cmd->add_option("--censor-days", leaving.censor_days, "right-censoring window in days");
    leaving_cmd->add_option("--bootstrap", leaving.bootstrap, "bootstrap resamples");
    leaving_cmd->add_option("--seed", leaving.seed, "random seed");
    leaving_cmd->add_option("--dataset-end", leaving.dataset_end, "end of observation (default: latest edit)");
    leaving_cmd->add_option("--plot", leaving.plot, "log-log leaving curve SVG");

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Agent-based population simulation");
    sim_cmd->add_option("--curves", sim.curves, "curves.json from analyze-leaving")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--lambda-from", sim.lambda_from, "contribs.ndjson to estimate the edit rate")
        ->check(CLI::ExistingFile);
    sim_cmd->add_option("--lambda", sim.lambda, "edit rate per day");
    sim_cmd->add_option("--scenario", sim.scenario, "1, 2, 3 or all")->capture_default_str();
    sim_cmd->add_option("--replicates", sim.replicates, "replicates per scenario and environment");
    sim_cmd->add_option("--seed", sim.seed, "random seed");
    sim_cmd->add_option("--horizon", sim.horizon, "last simulated day");
    sim_cmd->add_option("--toxic-factor", sim.toxic_factor, "toxic environment = other curve times this factor");
    sim_cmd->add_option("--out", sim.out, "sim.csv output")->required();
    sim_cmd->add_option("--plot", sim.plot, "population SVG");

    ReportArgs report;
    auto* report_cmd = app.add_subcommand("report", "Bundle stage outputs into one summary document");
    report_cmd->add_option("--dir", report.dir, "directory holding stage outputs and manifests")
        ->check(CLI::ExistingDirectory);
    report_cmd->add_option("--manifest", report.manifests, "manifest file (repeatable)")->check(CLI::ExistingFile);
    report_cmd->add_option("--out", report.out, "report.md output")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*scan_cmd) return run_scan(scan, common, out, err);
        if (*extract_cmd) return run_extract(extract, common, out, err);
        if (*score_cmd) return run_score(score, common, out, err);
        if (*activity_cmd) return run_activity(activity, common, out, err);
        if (*loss_cmd) return run_analyze_loss(loss, common, out, err);
        if (*leaving_cmd) return run_analyze_leaving(leaving, common, out, err);
        if (*sim_cmd) return run_simulate(sim, common, out, err);
        if (*report_cmd) return run_report(report, common, out, err);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("wikitox");
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace wikitox
