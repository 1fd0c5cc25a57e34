#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "rmu/certificate.hpp"
#include "rmu/instance.hpp"
#include "rmu/regularizers.hpp"
#include "rmu/solver.hpp"

namespace rmu {

using Json = nlohmann::json;

inline constexpr const char* kInstanceSchema = "rmu.instance/1";
inline constexpr const char* kSolveSchema = "rmu.solve/1";
inline constexpr const char* kCertificateSchema = "rmu.certificate/1";
inline constexpr const char* kTraceSchema = "rmu.trace/1";

/// File could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File was read but its content is malformed.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Matrices are stored as {"rows", "cols", "data"} with data in column-major
// order.
Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);
Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j);

Json operator_to_json(const LinearOperator& op);
OperatorPtr operator_from_json(const Json& j);

Json instance_to_json(const Instance& inst);
Instance instance_from_json(const Json& j);

Json reg_to_json(const RegParams& reg);
RegParams reg_from_json(const Json& j);

Json solver_config_to_json(const SolverConfig& c);

Json solve_result_to_json(const SolveResult& r, const RegParams& reg);
/// Reads back the "solution" matrix of a solve result document.
Eigen::MatrixXd solution_from_json(const Json& j);

Json certificate_to_json(const CertificateReport& rep);

/// One JSON object per line: iteration, objective, tau, step_norm, accepted.
void write_trace_jsonl(std::ostream& out, const std::vector<TraceEntry>& history);

/// Parses a JSON file; parse errors carry the line and column.
Json read_json_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames, so a failed write leaves
/// no partial file behind.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace rmu
