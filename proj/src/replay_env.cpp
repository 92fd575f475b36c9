#include "ren/replay_env.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <string_view>

#include "ren/error.hpp"

namespace ren {
namespace {

struct RawRow {
    std::int64_t timestamp;
    std::uint64_t user;
    std::uint64_t item;
    std::vector<std::uint64_t> impressions;
    std::size_t line;
};

template <class T>
T parse_int(std::string_view s, std::size_t line, const char* field) {
    T value{};
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (s.empty() || ec != std::errc() || ptr != last)
        throw ParseError(std::string("replay log: bad ") + field + " '" + std::string(s) + "'", line);
    return value;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

ReplayEnv ReplayEnv::from_log(const std::filesystem::path& path, std::size_t n_intervals) {
    if (n_intervals == 0) throw InvalidArgument("replay: need at least one interval");
    std::ifstream in(path);
    if (!in) throw InvalidArgument("replay: cannot open log " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw ParseError("replay log: empty file", 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "timestamp,user_id,item_id,impressions")
        throw ParseError("replay log: expected header 'timestamp,user_id,item_id,impressions'", 1);

    std::vector<RawRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != 4) throw ParseError("replay log: expected 4 columns", lineno);
        RawRow row;
        row.line = lineno;
        row.timestamp = parse_int<std::int64_t>(cells[0], lineno, "timestamp");
        row.user = parse_int<std::uint64_t>(cells[1], lineno, "user_id");
        row.item = parse_int<std::uint64_t>(cells[2], lineno, "item_id");
        if (!cells[3].empty())
            for (const auto tok : split(cells[3], '|'))
                row.impressions.push_back(parse_int<std::uint64_t>(tok, lineno, "impression id"));
        rows.push_back(std::move(row));
    }

    ReplayEnv env;
    env.n_intervals_ = n_intervals;
    std::map<std::uint64_t, std::size_t> item_index;
    std::map<std::uint64_t, std::size_t> user_index;
    for (const auto& r : rows) {
        item_index.emplace(r.item, 0);
        user_index.emplace(r.user, 0);
        for (const auto i : r.impressions) item_index.emplace(i, 0);
    }
    for (auto& [raw, dense] : item_index) {
        dense = env.raw_items_.size();
        env.raw_items_.push_back(raw);
    }
    for (auto& [raw, dense] : user_index) {
        dense = env.raw_users_.size();
        env.raw_users_.push_back(raw);
    }
    env.histories_.assign(env.raw_users_.size(), {});

    std::stable_sort(rows.begin(), rows.end(),
                     [](const RawRow& a, const RawRow& b) { return a.timestamp < b.timestamp; });
    if (rows.empty()) return env;
    const std::int64_t t0 = rows.front().timestamp;
    const std::int64_t span = rows.back().timestamp - t0 + 1;
    for (const auto& r : rows) {
        ReplayEvent e;
        e.timestamp = r.timestamp;
        e.user = user_index.at(r.user);
        e.clicked = item_index.at(r.item);
        for (const auto i : r.impressions) {
            const ItemId k = item_index.at(i);
            if (std::find(e.impressions.begin(), e.impressions.end(), k) != e.impressions.end())
                throw ParseError("replay log: duplicate impression id", r.line);
            e.impressions.push_back(k);
        }
        const auto offset = static_cast<unsigned __int128>(r.timestamp - t0);
        e.interval = static_cast<std::size_t>(offset * n_intervals / static_cast<unsigned __int128>(span));
        env.events_.push_back(std::move(e));
    }
    return env;
}

std::vector<ItemId> ReplayEnv::candidates(const ReplayEvent& e) const {
    if (!e.impressions.empty()) return e.impressions;
    std::vector<ItemId> all(n_items());
    std::iota(all.begin(), all.end(), ItemId{0});
    return all;
}

ReplayOutcome ReplayEnv::evaluate(const ReplayEvent& e, std::span<const ItemId> slate) const {
    ReplayOutcome o;
    o.optimal_reward = (e.impressions.empty() ||
                        std::find(e.impressions.begin(), e.impressions.end(), e.clicked) != e.impressions.end())
                           ? 1.0
                           : 0.0;
    for (std::size_t i = 0; i < slate.size(); ++i) {
        if (slate[i] == e.clicked) {
            o.hit = true;
            o.reward = 1.0;
            o.reciprocal_rank = 1.0 / static_cast<double>(i + 1);
            break;
        }
    }
    return o;
}

void ReplayEnv::consume(const ReplayEvent& e) { histories_.at(e.user).push_back(e.clicked); }

}  // namespace ren
