#pragma once

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "disent/models.hpp"

namespace disent {

using Json = nlohmann::ordered_json;

/// Named metric values for one seed's run.
struct SeedMetrics {
    std::uint64_t seed = 0;
    std::map<std::string, double> values;  // ordered => deterministic serialization
};

inline Json epoch_to_json(const EpochRecord& rec) {
    Json j;
    j["epoch"] = rec.epoch;
    j["temperature"] = rec.temperature;
    j["primary_loss"] = rec.primary_loss;
    j["snnl_loss"] = rec.snnl_loss;
    j["total_loss"] = rec.total_loss;
    j["isolated_batches"] = rec.isolated_batches;
    return j;
}

/// One JSON object per line, one line per epoch.
inline void write_history_jsonl(const TrainHistory& history, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    for (const auto& rec : history.epochs) os << epoch_to_json(rec).dump() << "\n";
    if (!os) throw std::runtime_error("write failed: " + path);
}

/// mean / min / max per metric across seeds. Every seed must report the same
/// metric names.
inline Json aggregate_metrics(const std::vector<SeedMetrics>& seeds) {
    if (seeds.empty()) throw std::invalid_argument("aggregate_metrics: no seeds");
    Json agg;
    for (const auto& [name, first_value] : seeds.front().values) {
        double total = 0.0;
        double lo = first_value;
        double hi = first_value;
        for (const auto& s : seeds) {
            auto it = s.values.find(name);
            if (it == s.values.end())
                throw std::invalid_argument("aggregate_metrics: seed " + std::to_string(s.seed) +
                                            " missing metric '" + name + "'");
            total += it->second;
            lo = std::min(lo, it->second);
            hi = std::max(hi, it->second);
        }
        Json entry;
        entry["mean"] = total / static_cast<double>(seeds.size());
        entry["min"] = lo;
        entry["max"] = hi;
        agg[name] = entry;
    }
    return agg;
}

/// Deterministic run report: command, configuration echo, per-seed metrics,
/// and aggregates. Deliberately timestamp-free so identical runs produce
/// byte-identical files.
inline Json build_report(const std::string& command, const Json& config,
                         const std::vector<SeedMetrics>& seeds) {
    Json report;
    report["command"] = command;
    report["config"] = config;
    Json seed_list = Json::array();
    Json per_seed;
    for (const auto& s : seeds) {
        seed_list.push_back(s.seed);
        Json values;
        for (const auto& [name, value] : s.values) values[name] = value;
        per_seed[std::to_string(s.seed)] = values;
    }
    report["seeds"] = seed_list;
    report["per_seed"] = per_seed;
    report["aggregate"] = aggregate_metrics(seeds);
    return report;
}

inline void write_json(const Json& j, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << j.dump(2) << "\n";
    if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace disent
