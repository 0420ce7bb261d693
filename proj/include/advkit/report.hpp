#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "advkit/analysis.hpp"

namespace advkit {

// Fixed results.csv header; one row per (sample, loss, model) with restarts
// already aggregated.
extern const char* kResultsCsvHeader;

// %.9g, locale-independent; the determinism contract for report files.
std::string format_float9(double v);

// JSON number capped at 9 significant digits (deterministic serialization).
nlohmann::ordered_json json_number(double v);

void write_results_csv(const std::vector<OutcomeRow>& rows, const std::string& path);
std::vector<OutcomeRow> read_results_csv(const std::string& path);

void write_json_file(const nlohmann::ordered_json& j, const std::string& path);
nlohmann::ordered_json read_json_file(const std::string& path);

// Adversarial-example sidecar written by the attack command and consumed by
// analyze: magic "ADVX" | u32 version (=1) | u32 N | u32 d | f32 data (N x d,
// row-major).
void write_adv_examples(const std::vector<float>& data, std::size_t n, std::size_t dim,
                        const std::string& path);
std::vector<float> read_adv_examples(const std::string& path, std::size_t* n, std::size_t* dim);

} // namespace advkit
