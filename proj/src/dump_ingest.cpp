#include "wikitox/dump_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <utility>

#include <boost/iostreams/device/file.hpp>
#include <boost/iostreams/filter/bzip2.hpp>
#include <boost/iostreams/filtering_stream.hpp>
#include <expat.h>

#include "wikitox/error.hpp"

namespace wikitox {

Contributor Contributor::registered(std::string username) {
    return Contributor{Kind::registered, std::move(username), false};
}

Contributor Contributor::anonymous(std::string ip) {
    return Contributor{Kind::anonymous, std::move(ip), false};
}

namespace {

constexpr std::size_t kChunkSize = 64 * 1024;

enum class Field {
    none,
    page_title,
    page_ns,
    page_id,
    rev_id,
    rev_timestamp,
    rev_username,
    rev_ip,
    rev_text,
    namespace_name,
    dbname,
};

std::uint64_t to_u64(const std::string& s, const char* what) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw DataError(std::string("bad ") + what + " '" + s + "'");
    }
    return v;
}

int to_int(const std::string& s, const char* what) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw DataError(std::string("bad ") + what + " '" + s + "'");
    }
    return v;
}

const char* find_attr(const XML_Char** attrs, const char* name) {
    for (int i = 0; attrs[i] != nullptr; i += 2) {
        if (std::strcmp(attrs[i], name) == 0) return attrs[i + 1];
    }
    return nullptr;
}

}  // namespace

class DumpReader::Impl {
public:
    Impl(std::unique_ptr<std::istream> input, std::string source)
        : input_(std::move(input)), source_(std::move(source)), buffer_(kChunkSize) {
        parser_ = XML_ParserCreate("UTF-8");
        if (parser_ == nullptr) throw Error("cannot allocate XML parser");
        XML_SetUserData(parser_, this);
        XML_SetElementHandler(parser_, &Impl::on_start, &Impl::on_end);
        XML_SetCharacterDataHandler(parser_, &Impl::on_text);
    }

    ~Impl() { XML_ParserFree(parser_); }

    std::optional<PageHistory> next() {
        while (!ready_) {
            if (finished_) return std::nullopt;
            XML_Status status;
            if (suspended_) {
                suspended_ = false;
                status = XML_ResumeParser(parser_);
            } else {
                input_->read(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
                auto n = static_cast<std::size_t>(input_->gcount());
                if (input_->bad()) throw IoError("read failed: " + source_);
                bytes_read_ += n;
                last_chunk_ = input_->eof();
                status = XML_Parse(parser_, buffer_.data(), static_cast<int>(n), last_chunk_ ? XML_TRUE : XML_FALSE);
            }
            check(status);
        }
        PageHistory page = std::move(*ready_);
        ready_.reset();
        return page;
    }

    const SiteInfo& site_info() const { return site_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    std::size_t peak_page_bytes() const { return peak_page_bytes_; }
    std::uint64_t bytes_read() const { return bytes_read_; }

private:
    void check(XML_Status status) {
        if (!callback_error_.empty()) {
            throw ParseError(callback_error_, static_cast<std::uint64_t>(XML_GetCurrentByteIndex(parser_)));
        }
        if (status == XML_STATUS_SUSPENDED) {
            suspended_ = true;
            return;
        }
        auto offset = static_cast<std::uint64_t>(std::max<XML_Index>(0, XML_GetCurrentByteIndex(parser_)));
        if (status == XML_STATUS_ERROR) {
            std::string msg = XML_ErrorString(XML_GetErrorCode(parser_));
            if (in_page_) {
                std::string name = page_.title.empty() ? "<untitled>" : page_.title;
                if (last_chunk_) {
                    throw ParseError(source_ + ": truncated input, incomplete page '" + name + "': " + msg,
                                     offset);
                }
                throw ParseError(source_ + ": malformed XML in page '" + name + "': " + msg, offset);
            }
            throw ParseError(source_ + ": malformed XML: " + msg, offset);
        }
        if (last_chunk_ && !suspended_) finished_ = true;
        if (finished_ && in_page_) {
            throw ParseError(source_ + ": truncated input, incomplete page '" + page_.title + "'", offset);
        }
    }

    static void on_start(void* data, const XML_Char* name, const XML_Char** attrs) {
        auto* self = static_cast<Impl*>(data);
        try {
            self->start(name, attrs);
        } catch (const std::exception& e) {
            self->fail(e.what());
        }
    }

    static void on_end(void* data, const XML_Char* name) {
        auto* self = static_cast<Impl*>(data);
        try {
            self->end(name);
        } catch (const std::exception& e) {
            self->fail(e.what());
        }
    }

    static void on_text(void* data, const XML_Char* s, int len) {
        auto* self = static_cast<Impl*>(data);
        if (self->field_ != Field::none) {
            self->text_.append(s, static_cast<std::size_t>(len));
            if (self->field_ == Field::rev_text) self->note_bytes(static_cast<std::size_t>(len));
        }
    }

    void fail(std::string message) {
        if (callback_error_.empty()) callback_error_ = source_ + ": " + std::move(message);
        XML_StopParser(parser_, XML_FALSE);
    }

    const std::string& parent() const {
        static const std::string none;
        return stack_.size() >= 2 ? stack_[stack_.size() - 2] : none;
    }

    void begin_field(Field f) {
        field_ = f;
        text_.clear();
    }

    void note_bytes(std::size_t n) {
        page_bytes_ += n;
        peak_page_bytes_ = std::max(peak_page_bytes_, page_bytes_);
    }

    void start(const char* name, const XML_Char** attrs) {
        stack_.emplace_back(name);
        const std::string& el = stack_.back();
        const std::string& par = parent();

        if (el == "mediawiki" && stack_.size() == 1) {
            const char* version = find_attr(attrs, "version");
            site_.schema_version = version ? version : "";
            if (site_.schema_version != "0.10" && site_.schema_version != "0.11") {
                warnings_.push_back("unknown export schema version '" + site_.schema_version +
                                    "', parsing best-effort");
            }
        } else if (el == "page") {
            finish_siteinfo();
            in_page_ = true;
            page_ = PageHistory{};
            page_bytes_ = 0;
        } else if (el == "revision" && in_page_) {
            in_revision_ = true;
            rev_ = Revision{};
            has_contributor_ = false;
        } else if (el == "title" && par == "page") {
            begin_field(Field::page_title);
        } else if (el == "ns" && par == "page") {
            begin_field(Field::page_ns);
        } else if (el == "id" && par == "page") {
            begin_field(Field::page_id);
        } else if (el == "id" && par == "revision") {
            begin_field(Field::rev_id);
        } else if (el == "timestamp" && par == "revision") {
            begin_field(Field::rev_timestamp);
        } else if (el == "contributor" && in_revision_) {
            const char* deleted = find_attr(attrs, "deleted");
            if (deleted != nullptr) {
                rev_.contributor = Contributor::anonymous("");
                has_contributor_ = true;
            }
        } else if (el == "username" && par == "contributor") {
            begin_field(Field::rev_username);
        } else if (el == "ip" && par == "contributor") {
            begin_field(Field::rev_ip);
        } else if (el == "text" && par == "revision") {
            begin_field(Field::rev_text);
        } else if (el == "namespace" && par == "namespaces") {
            const char* key = find_attr(attrs, "key");
            ns_key_ = key ? to_int(key, "namespace key") : 0;
            begin_field(Field::namespace_name);
        } else if (el == "dbname" && par == "siteinfo") {
            begin_field(Field::dbname);
        }
    }

    void end(const char* name) {
        std::string el = name;
        switch (field_) {
            case Field::page_title: page_.title = text_; break;
            case Field::page_ns: page_.namespace_id = to_int(text_, "namespace"); break;
            case Field::page_id: page_.page_id = to_u64(text_, "page id"); break;
            case Field::rev_id: rev_.revision_id = to_u64(text_, "revision id"); break;
            case Field::rev_timestamp: rev_.timestamp = parse_instant(text_); break;
            case Field::rev_username:
                rev_.contributor = Contributor::registered(text_);
                has_contributor_ = true;
                break;
            case Field::rev_ip:
                rev_.contributor = Contributor::anonymous(text_);
                has_contributor_ = true;
                break;
            case Field::rev_text: rev_.text = std::move(text_); break;
            case Field::namespace_name: site_.namespaces[ns_key_] = text_; break;
            case Field::dbname: site_.dbname = text_; break;
            case Field::none: break;
        }
        field_ = Field::none;
        text_.clear();

        if (el == "siteinfo") {
            finish_siteinfo();
        } else if (el == "revision" && in_revision_) {
            in_revision_ = false;
            if (!has_contributor_) rev_.contributor = Contributor::anonymous("");
            if (rev_.contributor.is_registered() && rev_.contributor.name.empty()) {
                rev_.contributor = Contributor::anonymous("");
            }
            page_.revisions.push_back(std::move(rev_));
        } else if (el == "page" && in_page_) {
            in_page_ = false;
            if (page_.namespace_id == site_.user_talk_namespace) {
                page_.owner_username = owner_from_title(page_.title, site_.user_talk_prefix);
            }
            ready_ = std::move(page_);
            XML_StopParser(parser_, XML_TRUE);
        }
        stack_.pop_back();
    }

    void finish_siteinfo() {
        if (siteinfo_done_) return;
        siteinfo_done_ = true;
        // MediaWiki numbers the user-talk namespace 3 in every language edition;
        // the localized prefix comes from the header.
        auto it = site_.namespaces.find(3);
        if (it != site_.namespaces.end()) {
            site_.user_talk_namespace = 3;
            site_.user_talk_prefix = it->second;
            return;
        }
        for (const auto& [key, nsname] : site_.namespaces) {
            if (nsname == "User talk") {
                site_.user_talk_namespace = key;
                site_.user_talk_prefix = nsname;
                return;
            }
        }
        if (!site_.namespaces.empty()) {
            warnings_.push_back("no user-talk namespace declared in <namespaces>; assuming 3");
        }
    }

    std::unique_ptr<std::istream> input_;
    std::string source_;
    std::vector<char> buffer_;
    XML_Parser parser_ = nullptr;

    bool suspended_ = false;
    bool finished_ = false;
    bool last_chunk_ = false;
    std::uint64_t bytes_read_ = 0;
    std::string callback_error_;

    std::vector<std::string> stack_;
    Field field_ = Field::none;
    std::string text_;
    int ns_key_ = 0;

    bool siteinfo_done_ = false;
    bool in_page_ = false;
    bool in_revision_ = false;
    bool has_contributor_ = false;
    PageHistory page_;
    Revision rev_;
    std::optional<PageHistory> ready_;
    std::size_t page_bytes_ = 0;
    std::size_t peak_page_bytes_ = 0;

    SiteInfo site_;
    std::vector<std::string> warnings_;
};

namespace {

bool looks_bzip2(const std::filesystem::path& path) {
    std::ifstream probe(path, std::ios::binary);
    char magic[3] = {};
    probe.read(magic, 3);
    return probe.gcount() == 3 && magic[0] == 'B' && magic[1] == 'Z' && magic[2] == 'h';
}

std::unique_ptr<std::istream> open_input(const std::filesystem::path& path, Compression compression) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw IoError("cannot open dump '" + path.string() + "'");
    }
    if (compression == Compression::detect) {
        compression = looks_bzip2(path) ? Compression::bzip2 : Compression::none;
    }
    if (compression == Compression::bzip2) {
        auto in = std::make_unique<boost::iostreams::filtering_istream>();
        in->push(boost::iostreams::bzip2_decompressor());
        in->push(boost::iostreams::file_source(path.string(), std::ios::binary));
        if (!in->good()) throw IoError("cannot open dump '" + path.string() + "'");
        return in;
    }
    auto in = std::make_unique<std::ifstream>(path, std::ios::binary);
    if (!*in) throw IoError("cannot open dump '" + path.string() + "'");
    return in;
}

}  // namespace

DumpReader::DumpReader(const std::filesystem::path& path, Compression compression)
    : impl_(std::make_unique<Impl>(open_input(path, compression), path.string())) {}

DumpReader::DumpReader(std::unique_ptr<std::istream> input, std::string source_name)
    : impl_(std::make_unique<Impl>(std::move(input), std::move(source_name))) {}

DumpReader::~DumpReader() = default;
DumpReader::DumpReader(DumpReader&&) noexcept = default;
DumpReader& DumpReader::operator=(DumpReader&&) noexcept = default;

std::optional<PageHistory> DumpReader::next() {
    try {
        return impl_->next();
    } catch (const boost::iostreams::bzip2_error& e) {
        throw IoError(std::string("bzip2 decompression failed: ") + e.what());
    }
}

const SiteInfo& DumpReader::site_info() const { return impl_->site_info(); }
const std::vector<std::string>& DumpReader::warnings() const { return impl_->warnings(); }
std::size_t DumpReader::peak_page_bytes() const { return impl_->peak_page_bytes(); }
std::uint64_t DumpReader::bytes_read() const { return impl_->bytes_read(); }

std::string owner_from_title(const std::string& title, const std::string& prefix) {
    std::string rest;
    if (!prefix.empty() && title.size() > prefix.size() && title.compare(0, prefix.size(), prefix) == 0 &&
        title[prefix.size()] == ':') {
        rest = title.substr(prefix.size() + 1);
    } else {
        auto colon = title.find(':');
        rest = colon == std::string::npos ? title : title.substr(colon + 1);
    }
    auto slash = rest.find('/');
    if (slash != std::string::npos) rest.resize(slash);
    return rest;
}

bool is_user_talk(const PageHistory& page, const SiteInfo& site, const TalkPageFilter& filter) {
    if (page.namespace_id != site.user_talk_namespace) return false;
    if (!filter.include_talk_subpages && page.title.find('/') != std::string::npos) return false;
    return true;
}

PageHistory sort_history(PageHistory page) {
    std::stable_sort(page.revisions.begin(), page.revisions.end(), [](const Revision& a, const Revision& b) {
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        return a.revision_id < b.revision_id;
    });
    return page;
}

}  // namespace wikitox
