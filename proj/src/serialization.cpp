#include "rmu/serialization.hpp"

#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <system_error>

namespace rmu {

namespace {

const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw InputError(std::string("missing field '") + key + "'");
  return j.at(key);
}

template <class T>
T get_as(const Json& j, const char* key) {
  try {
    return require(j, key).get<T>();
  } catch (const Json::type_error& e) {
    throw InputError(std::string("field '") + key + "' has the wrong type: " + e.what());
  }
}

Json shape_to_json(Shape s) { return Json::array({s.rows, s.cols}); }

Shape shape_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw InputError("shape must be a [rows, cols] pair");
  return {j[0].get<Eigen::Index>(), j[1].get<Eigen::Index>()};
}

Flavor flavor_from_string(const std::string& s) {
  if (s == "vector") return Flavor::Vector;
  if (s == "matrix") return Flavor::Matrix;
  throw InputError("unknown flavor '" + s + "'");
}

template <class T>
Json optional_to_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json data = Json::array();
  for (Eigen::Index k = 0; k < m.size(); ++k) data.push_back(m.reshaped()(k));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  const auto rows = get_as<Eigen::Index>(j, "rows");
  const auto cols = get_as<Eigen::Index>(j, "cols");
  const Json& data = require(j, "data");
  if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw InputError("matrix data length does not match rows x cols");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index k = 0; k < rows * cols; ++k) {
    const Json& v = data[static_cast<std::size_t>(k)];
    if (!v.is_number()) throw InputError("matrix entries must be numbers");
    m.reshaped()(k) = v.get<double>();
  }
  return m;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  if (!j.is_array()) throw InputError("expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InputError("expected an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

// ---------------------------------------------------------------------------

Json operator_to_json(const LinearOperator& op) {
  Json j{{"kind", op.kind()}, {"flavor", to_string(op.flavor())}, {"shape", shape_to_json(op.input_shape())}};
  if (const auto* d = dynamic_cast<const DenseOperator*>(&op)) {
    j["matrix"] = matrix_to_json(d->matrix());
  } else if (const auto* p = dynamic_cast<const NrsfmProjection*>(&op)) {
    j["points"] = p->points();
    Json blocks = Json::array();
    for (const auto& b : p->blocks()) blocks.push_back(matrix_to_json(b));
    j["blocks"] = std::move(blocks);
  } else if (dynamic_cast<const DifferenceOperator*>(&op)) {
    // Fully described by its shape.
  } else if (const auto* s = dynamic_cast<const StackedOperator*>(&op)) {
    Json parts = Json::array();
    for (const auto& part : s->parts()) parts.push_back(operator_to_json(*part));
    j["parts"] = std::move(parts);
  } else {
    throw std::invalid_argument("operator kind '" + op.kind() + "' is not serializable");
  }
  return j;
}

OperatorPtr operator_from_json(const Json& j) {
  const auto kind = get_as<std::string>(j, "kind");
  const Shape shape = shape_from_json(require(j, "shape"));
  try {
    if (kind == "dense") {
      const Flavor flavor = flavor_from_string(get_as<std::string>(j, "flavor"));
      return std::make_shared<DenseOperator>(matrix_from_json(require(j, "matrix")), flavor, shape);
    }
    if (kind == "nrsfm_projection") {
      std::vector<Eigen::Matrix<double, 2, 3>> blocks;
      for (const Json& b : require(j, "blocks")) {
        const Eigen::MatrixXd m = matrix_from_json(b);
        if (m.rows() != 2 || m.cols() != 3) throw InputError("projection blocks must be 2 x 3");
        blocks.emplace_back(m);
      }
      auto op = std::make_shared<NrsfmProjection>(std::move(blocks), get_as<Eigen::Index>(j, "points"));
      if (!(op->input_shape() == shape)) throw InputError("projection shape does not match its blocks");
      return op;
    }
    if (kind == "difference") return std::make_shared<DifferenceOperator>(shape.rows, shape.cols);
    if (kind == "stacked") {
      std::vector<OperatorPtr> parts;
      for (const Json& p : require(j, "parts")) parts.push_back(operator_from_json(p));
      return std::make_shared<StackedOperator>(std::move(parts));
    }
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("invalid operator: ") + e.what());
  }
  throw InputError("unknown operator kind '" + kind + "'");
}

// ---------------------------------------------------------------------------

Json instance_to_json(const Instance& inst) {
  inst.validate();
  Json j;
  j["schema"] = kInstanceSchema;
  j["flavor"] = to_string(inst.flavor());
  j["shape"] = shape_to_json(inst.shape());
  j["operator"] = operator_to_json(*inst.op);
  j["b"] = vector_to_json(inst.b);
  j["ground_truth"] = inst.ground_truth ? matrix_to_json(*inst.ground_truth) : Json(nullptr);
  j["delta"] = optional_to_json(inst.delta);
  j["rip_order"] = optional_to_json(inst.rip_order);
  j["target"] = optional_to_json(inst.target);
  j["penalty"] = inst.penalty ? operator_to_json(*inst.penalty) : Json(nullptr);
  j["provenance"] = {{"generator", inst.provenance.generator},
                     {"op_kind", inst.provenance.op_kind},
                     {"seed", inst.provenance.seed},
                     {"noise_sigma", inst.provenance.noise_sigma}};
  return j;
}

Instance instance_from_json(const Json& j) {
  const auto schema = get_as<std::string>(j, "schema");
  if (schema != kInstanceSchema) throw InputError("unsupported instance schema '" + schema + "'");
  Instance inst;
  inst.op = operator_from_json(require(j, "operator"));
  inst.b = vector_from_json(require(j, "b"));
  if (j.contains("ground_truth") && !j["ground_truth"].is_null()) inst.ground_truth = matrix_from_json(j["ground_truth"]);
  if (j.contains("delta") && !j["delta"].is_null()) inst.delta = j["delta"].get<double>();
  if (j.contains("rip_order") && !j["rip_order"].is_null()) inst.rip_order = j["rip_order"].get<int>();
  if (j.contains("target") && !j["target"].is_null()) inst.target = j["target"].get<int>();
  if (j.contains("penalty") && !j["penalty"].is_null()) inst.penalty = operator_from_json(j["penalty"]);
  if (j.contains("provenance")) {
    const Json& p = j["provenance"];
    inst.provenance.generator = p.value("generator", "");
    inst.provenance.op_kind = p.value("op_kind", "");
    inst.provenance.seed = p.value("seed", std::uint64_t{0});
    inst.provenance.noise_sigma = p.value("noise_sigma", 0.0);
  }
  if (flavor_from_string(get_as<std::string>(j, "flavor")) != inst.flavor()) {
    throw InputError("instance flavor does not match its operator");
  }
  try {
    inst.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("inconsistent instance: ") + e.what());
  }
  return inst;
}

// ---------------------------------------------------------------------------

Json reg_to_json(const RegParams& reg) {
  Json j{{"kind", to_string(reg.kind)}, {"mu", reg.mu}, {"threshold", reg.threshold()}};
  if (reg.kind == RegKind::L1 || reg.kind == RegKind::Nuclear) j["mu_prime"] = reg.mu_prime();
  return j;
}

RegParams reg_from_json(const Json& j) {
  try {
    return RegParams::make(reg_kind_from_string(get_as<std::string>(j, "kind")), get_as<double>(j, "mu"));
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
}

Json solver_config_to_json(const SolverConfig& c) {
  return {{"tau0", c.tau0},         {"max_iters", c.max_iters}, {"max_backtracks", c.max_backtracks},
          {"tol_obj", c.tol_obj},   {"tol_step", c.tol_step},   {"decrease_eps", c.decrease_eps}};
}

Json solve_result_to_json(const SolveResult& r, const RegParams& reg) {
  return {{"schema", kSolveSchema},
          {"reg", reg_to_json(reg)},
          {"status", to_string(r.status)},
          {"converged", converged(r.status)},
          {"objective", r.objective},
          {"residual", r.residual},
          {"reg_value", r.reg_value},
          {"penalty_value", r.penalty_value},
          {"support", r.support},
          {"iterations", r.iterations},
          {"accepted_steps", r.accepted_steps},
          {"tau", r.tau},
          {"solution", matrix_to_json(r.solution)}};
}

Eigen::MatrixXd solution_from_json(const Json& j) { return matrix_from_json(require(j, "solution")); }

Json certificate_to_json(const CertificateReport& rep) {
  Json passed = Json::array();
  for (bool b : rep.value_passed) passed.push_back(b);
  return {{"schema", kCertificateSchema},
          {"flavor", to_string(rep.flavor)},
          {"passed", rep.passed},
          {"mu", rep.mu},
          {"delta", rep.delta},
          {"delta_source", to_string(rep.delta_source)},
          {"interval", {rep.interval_lower, rep.interval_upper}},
          {"margin", rep.margin},
          {"required_margin", rep.required_margin},
          {"stationarity_residual", rep.stationarity_residual},
          {"separation", rep.separation},
          {"support", rep.support},
          {"sparsest_implication", rep.sparsest_implication},
          {"guarantee", rep.passed ? "any other stationary point differs from this one in more than " +
                                         std::to_string(rep.separation) +
                                         (rep.flavor == Flavor::Matrix ? " rank" : " entries")
                                   : "none"},
          {"z_values", vector_to_json(rep.z_values)},
          {"value_passed", std::move(passed)}};
}

void write_trace_jsonl(std::ostream& out, const std::vector<TraceEntry>& history) {
  for (const auto& e : history) {
    out << Json{{"iteration", e.iteration},
                {"objective", e.objective},
                {"tau", e.tau},
                {"step_norm", e.step_norm},
                {"accepted", e.accepted}}
               .dump()
        << '\n';
  }
}

// ---------------------------------------------------------------------------

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < upto; ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw InputError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("failed writing '" + path.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

}  // namespace rmu
