#include "heatsupply/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <unordered_set>

namespace heatsupply {

namespace fs = std::filesystem;

namespace {

using Key = std::pair<std::uint64_t, std::uint32_t>;  // (timestamp, seq)

Key key_of(const TelemetryFrame& f) { return {f.timestamp, f.seq}; }

std::string errno_message(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

}  // namespace

struct Store::StationLog {
    std::mutex append_mu;
    int fd = -1;
    std::unordered_set<std::uint32_t> seqs;  // guarded by append_mu

    // guarded by Store::mu_
    std::map<Key, StationRecord> index;
    std::uint64_t last_received_at = 0;

    ~StationLog() {
        if (fd >= 0) ::close(fd);
    }
};

std::string format_log_line(const StationRecord& record) {
    return std::to_string(record.received_at) + "|" + encode_frame(record.frame);
}

Result<StationRecord, DecodeError> parse_log_line(std::string_view line) {
    const auto bar = line.find('|');
    if (bar == std::string_view::npos || bar == 0) return DecodeError{DecodeErrorKind::MalformedSyntax, FrameField::Frame};
    const auto head = line.substr(0, bar);
    std::uint64_t received_at = 0;
    const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), received_at);
    if (ec != std::errc{} || ptr != head.data() + head.size())
        return DecodeError{DecodeErrorKind::MalformedSyntax, FrameField::Frame};
    auto frame = decode_frame(line.substr(bar + 1));
    if (!frame) return frame.error();
    return StationRecord{std::move(frame).value(), received_at};
}

Store::Store(fs::path data_dir, StoreOptions options) : data_dir_(std::move(data_dir)), options_(std::move(options)) {
    fs::create_directories(data_dir_);
    for (const auto& entry : fs::directory_iterator(data_dir_)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".log") continue;
        const auto station = StationId::parse(entry.path().stem().string());
        if (!station) {
            warn("ignoring log with invalid station name: " + entry.path().string());
            continue;
        }
        replay(entry.path(), *station);
    }
}

Store::~Store() = default;

void Store::warn(const std::string& message) const {
    if (options_.on_warning) {
        options_.on_warning(message);
    } else {
        std::cerr << "store: " << message << '\n';
    }
}

fs::path Store::log_path(const StationId& station) const { return data_dir_ / (station.str() + ".log"); }

void Store::replay(const fs::path& file, const StationId& station) {
    std::string content;
    {
        std::ifstream in(file, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        content = std::move(ss).str();
    }

    // Anything after the final newline is a torn write.
    const auto last_nl = content.rfind('\n');
    const std::size_t complete = last_nl == std::string::npos ? 0 : last_nl + 1;
    if (complete != content.size()) {
        fs::resize_file(file, complete);
        content.resize(complete);
    }

    auto& log = find_or_create(station);
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < content.size()) {
        const auto end = content.find('\n', start);
        const std::string_view line(content.data() + start, end - start);
        start = end + 1;
        ++line_no;

        auto rec = parse_log_line(line);
        if (!rec) {
            ++skipped_lines_;
            warn(file.string() + ":" + std::to_string(line_no) + ": skipping line (" + describe(rec.error()) + ")");
            continue;
        }
        if (rec->frame.station != station) {
            ++skipped_lines_;
            warn(file.string() + ":" + std::to_string(line_no) + ": skipping record for another station");
            continue;
        }
        if (!log.seqs.insert(rec->frame.seq).second) {
            ++skipped_lines_;
            warn(file.string() + ":" + std::to_string(line_no) + ": skipping duplicate seq");
            continue;
        }
        log.last_received_at = std::max(log.last_received_at, rec->received_at);
        log.index.emplace(key_of(rec->frame), std::move(rec).value());
    }
}

Store::StationLog* Store::find(const StationId& station) const {
    std::shared_lock lock(mu_);
    const auto it = stations_.find(station);
    return it == stations_.end() ? nullptr : it->second.get();
}

Store::StationLog& Store::find_or_create(const StationId& station) {
    if (auto* log = find(station)) return *log;
    std::unique_lock lock(mu_);
    auto& slot = stations_[station];
    if (!slot) slot = std::make_unique<StationLog>();
    return *slot;
}

Result<AppendOutcome, StorageFailure> Store::append(const TelemetryFrame& frame, std::uint64_t received_at) {
    auto& log = find_or_create(frame.station);
    std::lock_guard append_lock(log.append_mu);

    if (log.seqs.contains(frame.seq)) return AppendOutcome::Duplicate;

    if (log.fd < 0) {
        log.fd = ::open(log_path(frame.station).c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
        if (log.fd < 0) return StorageFailure{errno_message("open")};
    }

    StationRecord record{frame, received_at};
    const std::string line = format_log_line(record) + "\n";
    const off_t before = ::lseek(log.fd, 0, SEEK_END);
    std::size_t written = 0;
    while (written < line.size()) {
        const auto n = ::write(log.fd, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            const auto msg = errno_message("write");
            if (before >= 0 && ::ftruncate(log.fd, before) != 0) warn("could not roll back torn write");
            return StorageFailure{msg};
        }
        written += static_cast<std::size_t>(n);
    }
    if (options_.sync_writes && ::fdatasync(log.fd) != 0) return StorageFailure{errno_message("fdatasync")};

    log.seqs.insert(frame.seq);
    {
        std::unique_lock lock(mu_);
        log.last_received_at = std::max(log.last_received_at, received_at);
        log.index.emplace(key_of(frame), std::move(record));
    }
    return AppendOutcome::Appended;
}

Result<std::vector<StationRecord>, QueryError> Store::query_range(const StationId& station, std::uint64_t from,
                                                                  std::uint64_t to, std::size_t limit) const {
    if (from > to || limit == 0) return QueryError::InvalidArgument;
    std::shared_lock lock(mu_);
    const auto it = stations_.find(station);
    if (it == stations_.end() || it->second->index.empty()) return QueryError::UnknownStation;

    const auto& index = it->second->index;
    std::vector<StationRecord> out;
    for (auto r = index.lower_bound({from, 0}); r != index.end() && r->first.first <= to && out.size() < limit; ++r)
        out.push_back(r->second);
    return out;
}

Result<StationRecord, QueryError> Store::latest(const StationId& station) const {
    std::shared_lock lock(mu_);
    const auto it = stations_.find(station);
    if (it == stations_.end() || it->second->index.empty()) return QueryError::UnknownStation;
    return it->second->index.rbegin()->second;
}

std::vector<StationSummary> Store::list_stations() const {
    std::shared_lock lock(mu_);
    std::vector<StationSummary> out;
    for (const auto& [id, log] : stations_) {
        if (log->index.empty()) continue;
        out.push_back({id, log->last_received_at, log->index.size()});
    }
    return out;
}

}  // namespace heatsupply
