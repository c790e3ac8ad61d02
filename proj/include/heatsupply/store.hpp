#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "heatsupply/result.hpp"
#include "heatsupply/telemetry.hpp"

namespace heatsupply {

struct StationRecord {
    TelemetryFrame frame;
    std::uint64_t received_at = 0;

    friend bool operator==(const StationRecord&, const StationRecord&) = default;
};

enum class AppendOutcome { Appended, Duplicate };

struct StorageFailure {
    std::string message;
};

enum class QueryError { UnknownStation, InvalidArgument };

struct StationSummary {
    StationId station;
    std::uint64_t last_received_at = 0;
    std::size_t record_count = 0;

    friend bool operator==(const StationSummary&, const StationSummary&) = default;
};

struct StoreOptions {
    // fdatasync after every append; flush-only when false.
    bool sync_writes = true;
    std::function<void(const std::string&)> on_warning;
};

/// Append-only per-station telemetry log with in-memory indexes.
///
/// Each station owns `<data_dir>/<station>.log`, one record per line:
/// `<received_at>|<encoded frame>`. Indexes are rebuilt by replaying the
/// logs on construction. Undecodable lines are skipped with a warning; an
/// unterminated final line is truncated away.
///
/// Thread-safe: appends to one station are serialized, readers only ever
/// observe records whose line has been fully written.
class Store {
public:
    explicit Store(std::filesystem::path data_dir, StoreOptions options = {});
    ~Store();

    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    Result<AppendOutcome, StorageFailure> append(const TelemetryFrame& frame, std::uint64_t received_at);

    /// Records with from <= timestamp <= to, ordered by (timestamp, seq), at most `limit`.
    Result<std::vector<StationRecord>, QueryError> query_range(const StationId& station, std::uint64_t from,
                                                               std::uint64_t to, std::size_t limit) const;

    Result<StationRecord, QueryError> latest(const StationId& station) const;

    std::vector<StationSummary> list_stations() const;

    const std::filesystem::path& data_dir() const noexcept { return data_dir_; }
    std::filesystem::path log_path(const StationId& station) const;

    /// Number of lines skipped during startup replay.
    std::size_t skipped_lines() const noexcept { return skipped_lines_; }

private:
    struct StationLog;

    StationLog* find(const StationId& station) const;
    StationLog& find_or_create(const StationId& station);
    void replay(const std::filesystem::path& file, const StationId& station);
    void warn(const std::string& message) const;

    std::filesystem::path data_dir_;
    StoreOptions options_;
    std::size_t skipped_lines_ = 0;

    mutable std::shared_mutex mu_;  // guards stations_ and every StationLog index
    std::map<StationId, std::unique_ptr<StationLog>> stations_;
};

/// Serialized form of one log line, without the trailing newline.
std::string format_log_line(const StationRecord& record);
Result<StationRecord, DecodeError> parse_log_line(std::string_view line);

}  // namespace heatsupply
