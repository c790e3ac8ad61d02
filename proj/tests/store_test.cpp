#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "heatsupply/store.hpp"
#include "test_support.hpp"

namespace heatsupply {
namespace {

using testing::make_frame;
using testing::sid;
using testing::TempDir;

StoreOptions quiet_options(bool sync = false) {
    StoreOptions o;
    o.sync_writes = sync;
    o.on_warning = [](const std::string&) {};
    return o;
}

// Reference model: station -> list of records in arrival order, dedupe by seq.
class ReferenceStore {
public:
    AppendOutcome append(const TelemetryFrame& f, std::uint64_t received_at) {
        auto& list = data_[f.station.str()];
        for (const auto& r : list)
            if (r.frame.seq == f.seq) return AppendOutcome::Duplicate;
        list.push_back({f, received_at});
        return AppendOutcome::Appended;
    }

    std::optional<std::vector<StationRecord>> query(const std::string& station, std::uint64_t from, std::uint64_t to,
                                                    std::size_t limit) const {
        const auto it = data_.find(station);
        if (it == data_.end()) return std::nullopt;
        std::vector<StationRecord> out;
        for (const auto& r : it->second)
            if (r.frame.timestamp >= from && r.frame.timestamp <= to) out.push_back(r);
        std::sort(out.begin(), out.end(), [](const StationRecord& a, const StationRecord& b) {
            return std::tie(a.frame.timestamp, a.frame.seq) < std::tie(b.frame.timestamp, b.frame.seq);
        });
        if (out.size() > limit) out.erase(out.begin() + static_cast<std::ptrdiff_t>(limit), out.end());
        return out;
    }

    std::vector<std::pair<std::string, std::uint64_t>> stations() const {
        std::vector<std::pair<std::string, std::uint64_t>> out;
        for (const auto& [id, list] : data_) {
            std::uint64_t last = 0;
            for (const auto& r : list) last = std::max(last, r.received_at);
            out.emplace_back(id, last);
        }
        return out;
    }

private:
    std::map<std::string, std::vector<StationRecord>> data_;
};

std::vector<std::uint32_t> seqs(const std::vector<StationRecord>& records) {
    std::vector<std::uint32_t> out;
    for (const auto& r : records) out.push_back(r.frame.seq);
    return out;
}

TEST(Store, AppendAndDedupe) {
    TempDir dir;
    Store store(dir.path(), quiet_options());
    EXPECT_EQ(*store.append(make_frame("ST01", 1, 100), 500), AppendOutcome::Appended);
    EXPECT_EQ(*store.append(make_frame("ST01", 2, 101), 501), AppendOutcome::Appended);
    EXPECT_EQ(*store.append(make_frame("ST01", 1, 100), 502), AppendOutcome::Duplicate);
    // Same seq with different content is still a duplicate.
    EXPECT_EQ(*store.append(make_frame("ST01", 2, 999, 300), 503), AppendOutcome::Duplicate);
    EXPECT_EQ(store.query_range(sid("ST01"), 0, UINT64_MAX, 100)->size(), 2u);
}

TEST(Store, LogLineFormat) {
    TempDir dir;
    {
        Store store(dir.path(), quiet_options(true));
        ASSERT_TRUE(store.append(make_frame("ST01", 1, 1700000000), 1700000005).ok());
    }
    std::ifstream in(dir.path() / "ST01.log");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "1700000005|ST01;1;1700000000;20.0,20.0,20.0,20.0,20.0,20.0,20.0,20.0;0,0,0,0,0,0,0,0;AUTO");
}

TEST(Store, QueryRangeIsInclusiveAndOrdered) {
    TempDir dir;
    Store store(dir.path(), quiet_options());
    for (std::uint32_t i = 0; i < 10; ++i) ASSERT_TRUE(store.append(make_frame("ST01", i + 1, 100 + i), 1000).ok());

    const auto mid = store.query_range(sid("ST01"), 103, 106, 100);
    ASSERT_TRUE(mid.ok());
    ASSERT_EQ(mid->size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ((*mid)[i].frame.timestamp, 103 + i);

    const auto first3 = store.query_range(sid("ST01"), 0, UINT64_MAX, 3);
    EXPECT_EQ(seqs(*first3), (std::vector<std::uint32_t>{1, 2, 3}));
}

TEST(Store, QueryErrors) {
    TempDir dir;
    Store store(dir.path(), quiet_options());
    EXPECT_EQ(store.query_range(sid("NOPE"), 0, 10, 1).error(), QueryError::UnknownStation);
    EXPECT_EQ(store.latest(sid("NOPE")).error(), QueryError::UnknownStation);
    ASSERT_TRUE(store.append(make_frame("ST01", 1, 5), 5).ok());
    EXPECT_EQ(store.query_range(sid("ST01"), 10, 5, 1).error(), QueryError::InvalidArgument);
    EXPECT_EQ(store.query_range(sid("ST01"), 0, 10, 0).error(), QueryError::InvalidArgument);
    EXPECT_TRUE(store.query_range(sid("ST01"), 6, 10, 1)->empty());
}

TEST(Store, LatestTieBreaksBySeq) {
    TempDir dir;
    Store store(dir.path(), quiet_options());
    ASSERT_TRUE(store.append(make_frame("ST01", 1, 100), 1).ok());
    ASSERT_TRUE(store.append(make_frame("ST01", 3, 102), 1).ok());
    ASSERT_TRUE(store.append(make_frame("ST01", 2, 101), 1).ok());
    EXPECT_EQ(store.latest(sid("ST01"))->frame.timestamp, 102u);

    ASSERT_TRUE(store.append(make_frame("ST02", 6, 100), 1).ok());
    ASSERT_TRUE(store.append(make_frame("ST02", 5, 100), 1).ok());
    EXPECT_EQ(store.latest(sid("ST02"))->frame.seq, 6u);
}

TEST(Store, ListStations) {
    TempDir dir;
    Store store(dir.path(), quiet_options());
    EXPECT_TRUE(store.list_stations().empty());
    ASSERT_TRUE(store.append(make_frame("ST02", 1, 100), 70).ok());
    ASSERT_TRUE(store.append(make_frame("ST01", 1, 100), 50).ok());
    ASSERT_TRUE(store.append(make_frame("ST01", 2, 90), 60).ok());
    ASSERT_TRUE(store.append(make_frame("ST01", 3, 110), 55).ok());
    const auto list = store.list_stations();
    ASSERT_EQ(list.size(), 2u);
    EXPECT_EQ(list[0], (StationSummary{sid("ST01"), 60, 3}));
    EXPECT_EQ(list[1], (StationSummary{sid("ST02"), 70, 1}));
}

TEST(Store, StorageFailureIsDistinct) {
    TempDir dir;
    Store store(dir.path(), quiet_options());
    // A directory where the log file should be makes open() fail.
    std::filesystem::create_directories(dir.path() / "ST09.log");
    const auto r = store.append(make_frame("ST09", 1, 1), 1);
    ASSERT_FALSE(r.ok());
    EXPECT_FALSE(r.error().message.empty());
}

TEST(Store, RestartAfterHundredAppends) {
    TempDir dir;
    ReferenceStore ref;
    std::mt19937_64 rng(21);
    {
        Store store(dir.path(), quiet_options(true));
        for (std::uint32_t i = 1; i <= 100; ++i) {
            const auto f = make_frame(i % 2 ? "ST01" : "ST02", i, 1000 + rng() % 50, static_cast<int>(rng() % 1000));
            ASSERT_EQ(*store.append(f, 2000 + i), ref.append(f, 2000 + i));
        }
    }
    Store reopened(dir.path(), quiet_options());
    for (const auto* id : {"ST01", "ST02"}) {
        const auto got = reopened.query_range(sid(id), 0, UINT64_MAX, 1000);
        ASSERT_TRUE(got.ok());
        EXPECT_EQ(*got, *ref.query(id, 0, UINT64_MAX, 1000));
    }
    // Dedupe survives the restart.
    EXPECT_EQ(*reopened.append(make_frame("ST01", 1, 1), 1), AppendOutcome::Duplicate);
}

TEST(Store, ReplaySkipsCorruptLinesAndTruncatesTornTail) {
    TempDir dir;
    {
        std::ofstream out(dir.path() / "ST01.log");
        out << "10|" << encode_frame(make_frame("ST01", 1, 100)) << "\n";
        out << "garbage line\n";
        out << "11|" << encode_frame(make_frame("ST02", 2, 101)) << "\n";  // wrong station
        out << "12|" << encode_frame(make_frame("ST01", 3, 102)) << "\n";
        out << "13|ST01;4;103;20.0,20";  // torn
    }
    std::vector<std::string> warnings;
    StoreOptions opts;
    opts.on_warning = [&](const std::string& w) { warnings.push_back(w); };
    Store store(dir.path(), opts);
    EXPECT_EQ(store.skipped_lines(), 2u);
    EXPECT_EQ(warnings.size(), 2u);
    EXPECT_EQ(seqs(*store.query_range(sid("ST01"), 0, UINT64_MAX, 10)), (std::vector<std::uint32_t>{1, 3}));

    // The torn tail is gone from disk, so a new append starts on a clean line.
    ASSERT_TRUE(store.append(make_frame("ST01", 4, 103), 14).ok());
    Store again(dir.path(), quiet_options());
    EXPECT_EQ(seqs(*again.query_range(sid("ST01"), 0, UINT64_MAX, 10)), (std::vector<std::uint32_t>{1, 3, 4}));
}

TEST(Store, TruncationAtAnyOffsetRecoversAPrefix) {
    TempDir dir;
    std::vector<StationRecord> appended;
    {
        Store store(dir.path(), quiet_options());
        for (std::uint32_t i = 1; i <= 20; ++i) {
            const auto f = make_frame("ST01", i, 100 + i, 100 + static_cast<int>(i));
            ASSERT_TRUE(store.append(f, 500 + i).ok());
            appended.push_back({f, 500 + i});
        }
    }
    const auto log = dir.path() / "ST01.log";
    const auto size = std::filesystem::file_size(log);
    std::ifstream in(log, std::ios::binary);
    const std::string original((std::istreambuf_iterator<char>(in)), {});

    for (std::uintmax_t cut = 0; cut <= size; ++cut) {
        TempDir copy;
        {
            std::ofstream out(copy.path() / "ST01.log", std::ios::binary);
            out.write(original.data(), static_cast<std::streamsize>(cut));
        }
        Store store(copy.path(), quiet_options());
        EXPECT_EQ(store.skipped_lines(), 0u);
        const auto got = store.query_range(sid("ST01"), 0, UINT64_MAX, 1000);
        const std::vector<StationRecord> records = got.ok() ? *got : std::vector<StationRecord>{};
        ASSERT_LE(records.size(), appended.size());
        EXPECT_TRUE(std::equal(records.begin(), records.end(), appended.begin())) << "cut at " << cut;
    }
}

TEST(StoreProperties, ReferenceModelEquivalence) {
    TempDir dir;
    auto store = std::make_unique<Store>(dir.path(), quiet_options());
    ReferenceStore ref;
    std::mt19937_64 rng(1234);
    const std::vector<std::string> ids{"A", "B", "C", "D"};

    for (int op = 0; op < 12000; ++op) {
        const auto& id = ids[rng() % ids.size()];
        switch (rng() % 10) {
            case 0: case 1: case 2: case 3: case 4: {
                const auto f = make_frame(id, static_cast<std::uint32_t>(rng() % 400), rng() % 200,
                                          static_cast<int>(rng() % 1000), rng() % 2 ? PumpState::On : PumpState::Off);
                const auto at = rng() % 10000;
                ASSERT_EQ(*store->append(f, at), ref.append(f, at)) << "op " << op;
                break;
            }
            case 5: case 6: {
                std::uint64_t a = rng() % 220, b = rng() % 220;
                if (a > b) std::swap(a, b);
                const std::size_t limit = 1 + rng() % 50;
                const auto got = store->query_range(sid(id), a, b, limit);
                const auto want = ref.query(id, a, b, limit);
                ASSERT_EQ(got.ok(), want.has_value());
                if (want) ASSERT_EQ(*got, *want) << "op " << op;
                break;
            }
            case 7: {
                const auto got = store->latest(sid(id));
                const auto all = ref.query(id, 0, UINT64_MAX, SIZE_MAX);
                ASSERT_EQ(got.ok(), all.has_value());
                if (all) ASSERT_EQ(*got, all->back());
                break;
            }
            case 8: {
                const auto got = store->list_stations();
                const auto want = ref.stations();
                ASSERT_EQ(got.size(), want.size());
                for (std::size_t i = 0; i < got.size(); ++i) {
                    EXPECT_EQ(got[i].station.str(), want[i].first);
                    EXPECT_EQ(got[i].last_received_at, want[i].second);
                }
                break;
            }
            default:
                if (rng() % 20 == 0) store = std::make_unique<Store>(dir.path(), quiet_options());
                break;
        }
    }
}

TEST(StoreConcurrency, ParallelAppendersAndReaders) {
    TempDir dir;
    Store store(dir.path(), quiet_options());
    constexpr int kThreads = 8;
    constexpr std::uint32_t kPerThread = 300;
    std::atomic<bool> done{false};
    std::atomic<int> appended{0};

    std::thread reader([&] {
        while (!done) {
            for (const auto* id : {"S0", "S1"}) {
                const auto r = store.query_range(sid(id), 0, UINT64_MAX, 100000);
                if (!r) continue;
                std::set<std::uint32_t> uniq;
                for (const auto& rec : *r) ASSERT_TRUE(uniq.insert(rec.frame.seq).second);
            }
        }
    });
    std::vector<std::thread> writers;
    for (int t = 0; t < kThreads; ++t) {
        writers.emplace_back([&, t] {
            // Two stations; every thread races on the same seq range.
            for (std::uint32_t s = 1; s <= kPerThread; ++s) {
                const auto r = store.append(make_frame(t % 2 ? "S1" : "S0", s, s), s);
                if (r.ok() && *r == AppendOutcome::Appended) ++appended;
            }
        });
    }
    for (auto& w : writers) w.join();
    done = true;
    reader.join();

    EXPECT_EQ(appended.load(), 2 * static_cast<int>(kPerThread));
    Store reopened(dir.path(), quiet_options());
    EXPECT_EQ(reopened.skipped_lines(), 0u);
    for (const auto* id : {"S0", "S1"}) EXPECT_EQ(reopened.query_range(sid(id), 0, UINT64_MAX, 100000)->size(), kPerThread);
}

}  // namespace
}  // namespace heatsupply
