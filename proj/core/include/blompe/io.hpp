#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "blompe/divergences.hpp"
#include "blompe/forward.hpp"
#include "blompe/simulate.hpp"

namespace blompe::io {

using Json = nlohmann::ordered_json;

/// "%.17g"; non-finite values become "inf", "-inf" or "nan".
std::string format_double(double value);

/// Pretty JSON text (two-space indent, trailing newline). Floating-point
/// numbers use 17 significant digits; non-finite ones are written as null.
std::string dump(const Json& json);

Json parse_json(std::string_view text, std::string_view source);
Json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

Json to_json(const Vector& v);
Json to_json(const Matrix& m);  // array of rows
Vector vector_from_json(const Json& json, std::string_view what);
Matrix matrix_from_json(const Json& json, std::string_view what);

Json to_json(const Bounds& bounds);
Bounds bounds_from_json(const Json& json, Bounds base);
Bounds bounds_from_json(const Json& json);

/// List of 1-based groups per cluster.
Json to_json(const BlockStructure& blocks);
/// Accepts one partition (shared by all K clusters) or one per cluster.
/// Non-canonical input is canonicalized with a warning; anything that is
/// not a partition of {1..D} throws Errc::invalid_partition.
BlockStructure blocks_from_json(const Json& json, int K, int D);

Json to_json(const ModelIndex& index);
ModelIndex index_from_json(const Json& json);

Json to_json(const BlompeModel& model);
BlompeModel model_from_json(const Json& json);

Json to_json(const ForwardParams& fwd);

Json fit_report(const FitResult& fit, const Dataset& data);
Json selection_report(const SelectionRun& run);
Json divergence_report(const PairedDivergences& div, std::size_t n_designs);

Json to_json(const FitConfig& config);
FitConfig fit_config_from_json(const Json& json, FitConfig base = {});
Json to_json(const DetectConfig& config);
DetectConfig detect_config_from_json(const Json& json, DetectConfig base = {});
Json to_json(const SlopeConfig& config);
SlopeConfig slope_config_from_json(const Json& json, SlopeConfig base = {});

TrueModelSpec true_model_spec_from_json(const Json& json);
/// Either "true_model" (a model document) or "true_model_spec".
Scenario scenario_from_json(const Json& json);
Json oracle_report(const OracleReport& report, const Scenario& scenario);
std::string oracle_cells_csv(const OracleReport& report);

/// Data files: header y_1..y_L,x_1..x_D, one observation per line.
/// Errors carry "source:line:column" positions.
Dataset parse_data_csv(std::string_view text, std::string_view source,
                       UnitBoxPolicy policy = UnitBoxPolicy::warn);
Dataset read_data_csv(const std::filesystem::path& path,
                      UnitBoxPolicy policy = UnitBoxPolicy::warn);
std::string data_csv(const Matrix& X, const Matrix& Y);

/// Selection table: K,d,L,n,blocks,nll,dim,pen_shape,converged,iterations
/// with the block structure as a quoted JSON field.
std::string table_csv(const SelectionTable& table);
SelectionTable parse_table_csv(std::string_view text, std::string_view source);

/// series,x,y rows: the (pen_shape, nll) cloud followed by the
/// (kappa, selected_dim) curve.
std::string slope_csv(const SelectionTable& table, int grid_size);

/// Splits one CSV record; fields may be double-quoted with "" escapes.
std::vector<std::string> split_csv_record(std::string_view line, std::string_view source,
                                          std::size_t line_number);

}  // namespace blompe::io
