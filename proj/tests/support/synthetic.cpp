#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace wikitox::testing {

std::vector<EventSample> bernoulli_events(std::size_t n, double q_before, double q_after, EventKind kind, Rng& rng) {
    std::vector<EventSample> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& e = out[i];
        e.user = static_cast<std::uint32_t>(i);
        e.kind = kind;
        e.event_time = kEpoch;
        e.window.center = kEpoch;
        for (int d = -kWindowRadius; d <= kWindowRadius; ++d) {
            if (bernoulli(rng, d < 0 ? q_before : q_after)) e.window.set(d);
        }
    }
    return out;
}

namespace {

// Poisson points on [from, to) seconds at `rate` per day.
void poisson_points(Rng& rng, double rate, std::int64_t from, std::int64_t to, std::vector<Instant>& out) {
    if (rate <= 0.0) return;
    double t = static_cast<double>(from);
    const double scale = static_cast<double>(kDay) / rate;
    while (true) {
        t += -std::log1p(-uniform01(rng)) * scale;
        if (t >= static_cast<double>(to)) break;
        out.push_back(instant_from_epoch(static_cast<std::int64_t>(t)));
    }
}

double rate_for(double a) { return -std::log1p(-a); }

}  // namespace

std::vector<UserRecord> poisson_population(const PoissonPopulation& p, std::uint64_t seed) {
    std::vector<UserRecord> users;
    users.reserve(p.toxic_users + p.control_users);
    const std::int64_t base = epoch_seconds(kEpoch);
    const std::int64_t end = base + std::int64_t{p.days} * kDay;
    for (std::size_t i = 0; i < p.toxic_users + p.control_users; ++i) {
        Rng rng = make_rng(seed, "population", i);
        const bool toxic = i < p.toxic_users;
        const double a = toxic ? p.toxic_a_min + (p.toxic_a_max - p.toxic_a_min) * uniform01(rng)
                               : p.control_a_min + (p.control_a_max - p.control_a_min) * uniform01(rng);
        std::vector<Instant> ts;
        UserRecord u;
        char name[32];
        std::snprintf(name, sizeof name, "%s%06zu", toxic ? "T" : "C", i);
        if (toxic) {
            // comment placed in the middle so both windows fit inside the history
            std::int64_t span = std::int64_t{p.days - 300} * kDay;
            std::int64_t tau = base + 150 * kDay + static_cast<std::int64_t>(uniform01(rng) * static_cast<double>(span));
            std::int64_t after_end = tau + 100 * kDay;
            poisson_points(rng, rate_for(a), base, tau, ts);
            poisson_points(rng, rate_for(std::max(a - p.drop, 0.0)), tau, after_end, ts);
            poisson_points(rng, rate_for(a), after_end, end, ts);
            ts.push_back(instant_from_epoch(tau - 60));  // the edit being responded to
            u.received.push_back(ReceivedComment{instant_from_epoch(tau), 0.95});
        } else {
            poisson_points(rng, rate_for(a), base, end, ts);
            if (ts.empty()) ts.push_back(instant_from_epoch(base + p.days / 2 * kDay));
            std::int64_t when = base + static_cast<std::int64_t>(uniform01(rng) * static_cast<double>(end - base));
            u.received.push_back(ReceivedComment{instant_from_epoch(when), 0.05});
        }
        u.log = ContributionLog::make(name, std::move(ts));
        users.push_back(std::move(u));
    }
    return users;
}

ContributionLog periodic_log(std::string user, int length, const std::function<bool(int)>& pattern) {
    std::vector<Instant> ts;
    for (int d = 0; d < length; ++d) {
        if (pattern(d)) ts.push_back(kEpoch + Seconds{std::int64_t{d} * kDay});
    }
    return ContributionLog::make(std::move(user), std::move(ts));
}

std::vector<LabeledHistory> random_careers(std::size_t users, const CareerModel& model, Rng& rng) {
    std::vector<LabeledHistory> out;
    out.reserve(users);
    for (std::size_t u = 0; u < users; ++u) {
        LabeledHistory h;
        h.user = "U" + std::to_string(u);
        for (int n = 1;; ++n) {
            LabeledContribution c;
            c.index = static_cast<std::uint32_t>(n);
            c.timestamp = kEpoch + Seconds{std::int64_t{n} * kDay};
            c.followed_by_toxic = bernoulli(rng, model.toxic_rate);
            h.contributions.push_back(c);
            double q = model.leave(n) * (c.followed_by_toxic ? model.toxic_factor : 1.0);
            if (bernoulli(rng, std::clamp(q, 0.0, 1.0))) break;
            if (n >= model.cap) {
                h.contributions.back().timestamp = kCareerEnd - Seconds{kDay};
                break;
            }
        }
        h.contributions.back().is_last = true;
        out.push_back(std::move(h));
    }
    return out;
}

LeaveCurve binomial_power_law_curve(double c, double alpha, std::uint64_t cohort, Rng& rng) {
    LeaveCurve curve;
    std::uint64_t remaining = cohort;
    for (int n = 1; n <= kMaxRank; ++n) {
        auto i = static_cast<std::size_t>(n - 1);
        double p = std::clamp(c * std::pow(n, -alpha), 0.0, 1.0);
        std::binomial_distribution<std::uint64_t> draw(remaining, p);
        std::uint64_t left = remaining > 0 ? draw(rng) : 0;
        curve.at_least[i] = remaining;
        curve.exactly[i] = left;
        if (remaining > 0) curve.probability[i] = static_cast<double>(left) / static_cast<double>(remaining);
        remaining -= left;
    }
    return curve;
}

PageHistory insert_only_history(Rng& rng, int revisions, std::vector<PlantedComment>& planted,
                                const std::string& owner) {
    static const char* authors[] = {"Alice", "Bob", "Carol", "Dave", "Erin"};
    PageHistory page;
    page.page_id = 1 + uniform_index(rng, 1'000'000);
    page.title = "User talk:" + owner;
    page.namespace_id = 3;
    page.owner_username = owner;
    std::vector<std::string> lines;
    std::uint64_t serial = 0;
    for (int r = 0; r < revisions; ++r) {
        std::size_t count = 1 + uniform_index(rng, 3);
        std::vector<std::string> block;
        for (std::size_t k = 0; k < count; ++k) {
            block.push_back("message " + std::to_string(page.page_id) + "-" + std::to_string(serial++) + " says " +
                            std::to_string(uniform_index(rng, 100000)));
        }
        std::size_t at = uniform_index(rng, lines.size() + 1);
        lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(at), block.begin(), block.end());
        Revision rev;
        rev.revision_id = 1000 + static_cast<std::uint64_t>(r);
        rev.timestamp = kEpoch + Seconds{std::int64_t{r} * 3600};
        rev.contributor = Contributor::registered(authors[uniform_index(rng, std::size(authors))]);
        std::string text;
        for (const auto& l : lines) text += l + "\n";
        rev.text = text;
        std::string joined;
        for (std::size_t k = 0; k < block.size(); ++k) joined += (k ? "\n" : "") + block[k];
        planted.push_back(PlantedComment{rev.revision_id, rev.contributor.name, joined});
        page.revisions.push_back(std::move(rev));
    }
    return page;
}

}  // namespace wikitox::testing
