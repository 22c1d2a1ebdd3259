#pragma once

#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "eprcam/model.hpp"
#include "eprcam/pipeline.hpp"

namespace eprcam::report {

using nlohmann::json;

json to_json(const model::AnalyticPrediction& p);
json to_json(const inference::GaussianFit& fit);
json to_json(const correlate::SubtractedMap& map);
json to_json(const pipeline::PlaneAnalysis& plane);
json to_json(const inference::EprReport& report);
/// Full run report: provenance (seed, config, digest, masks), calibration,
/// per-plane analyses with embedded maps, and the EPR summary.
json to_json(const pipeline::RunResult& run);

/// Aligned text table of the variances, products and dimensionality.
/// Throws Format on a malformed report.
std::string format_table(const json& report);

/// Long-format CSV (u,v,value,masked) of an embedded map. A map without
/// values produces only the header row.
void write_map_csv(const json& map, std::ostream& out);

/// 1D CSV along u at fixed v (`along_u` true) or along v at fixed u.
void write_cross_section_csv(const json& map, bool along_u, int at, std::ostream& out);

/// Long-format CSV (c1,c2,value) of a joint distribution.
void write_joint_csv(const correlate::JointDistribution& joint, std::ostream& out);

}  // namespace eprcam::report
