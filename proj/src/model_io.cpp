#include "rdsens/model_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rdsens/errors.hpp"

namespace rdsens {

namespace {

using nlohmann::json;

Eigen::VectorXd parse_vector(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError("model file: " + where + " must be an array");
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw ConfigError("model file: " + where + " must contain numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ConfigError("model file: " + where + " must be an array of rows");
  const size_t rows = j.size();
  const size_t cols = j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ConfigError("model file: ragged rows in " + where);
    for (size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number())
        throw ConfigError("model file: " + where + " must contain numbers");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j[r][c].get<double>();
    }
  }
  return m;
}

std::vector<Eigen::MatrixXd> parse_matrix_list(const json& j,
                                               const std::string& where) {
  if (!j.is_array())
    throw ConfigError("model file: " + where + " must be an array of matrices");
  std::vector<Eigen::MatrixXd> out;
  for (size_t i = 0; i < j.size(); ++i)
    out.push_back(parse_matrix(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

// zeta(x) = constant + <linear, x> + x^T quadratic x (all parts optional).
void parse_zeta(const json& j, const std::string& where, int state_dim,
                double& constant, Eigen::VectorXd& lin, Eigen::MatrixXd& quad) {
  constant = j.value("constant", 0.0);
  if (j.contains("linear")) {
    lin = parse_vector(j["linear"], where + ".linear");
    if (lin.size() != state_dim)
      throw ConfigError("model file: " + where + ".linear has wrong length");
  } else {
    lin = Eigen::VectorXd::Zero(state_dim);
  }
  if (j.contains("quadratic")) {
    quad = parse_matrix(j["quadratic"], where + ".quadratic");
    if (quad.rows() != state_dim || quad.cols() != state_dim)
      throw ConfigError("model file: " + where + ".quadratic has wrong shape");
  } else {
    quad.resize(0, 0);
  }
}

}  // namespace

LoadedModel load_model_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model file: invalid JSON: ") + e.what());
  }

  try {
    if (!j.contains("dims") || !j.contains("domain"))
      throw ConfigError("model file: 'dims' and 'domain' are required");
    const json& dims = j["dims"];
    const int J = dims.value("state", 0);
    const int K = dims.value("noise", J);
    const int M = dims.value("params", 0);
    if (J < 1 || K < 1 || M < 1)
      throw ConfigError("model file: dims.state/noise/params must be positive");

    const json& dom = j["domain"];
    if (!dom.contains("normals") || !dom.contains("offsets") ||
        !dom.contains("interior_point"))
      throw ConfigError(
          "model file: domain needs normals, offsets and interior_point");
    Eigen::MatrixXd normals = parse_matrix(dom["normals"], "domain.normals");
    if (normals.cols() != J)
      throw ConfigError("model file: domain.normals column count must equal dims.state");
    const int N = static_cast<int>(normals.rows());
    AffineModelSpec spec{
        .name = j.value("name", std::string("custom")),
        .domain = Polyhedron(std::move(normals),
                             parse_vector(dom["offsets"], "domain.offsets"),
                             parse_vector(dom["interior_point"],
                                          "domain.interior_point")),
        .noise_dim = K,
        .param_dim = M,
    };

    if (!j.contains("reflection") || !j["reflection"].contains("base"))
      throw ConfigError("model file: reflection.base is required");
    spec.R_base = parse_matrix(j["reflection"]["base"], "reflection.base");
    if (j["reflection"].contains("alpha"))
      spec.R_alpha = parse_matrix_list(j["reflection"]["alpha"], "reflection.alpha");

    const json x0 = j.value("x0", json::object());
    spec.x0_base = x0.contains("base") ? parse_vector(x0["base"], "x0.base")
                                       : Eigen::VectorXd::Zero(J);
    spec.x0_alpha = x0.contains("alpha") ? parse_matrix(x0["alpha"], "x0.alpha")
                                         : Eigen::MatrixXd::Zero(J, M);

    const json drift = j.value("drift", json::object());
    spec.b_base = drift.contains("base") ? parse_vector(drift["base"], "drift.base")
                                         : Eigen::VectorXd::Zero(J);
    spec.b_alpha = drift.contains("alpha")
                       ? parse_matrix(drift["alpha"], "drift.alpha")
                       : Eigen::MatrixXd::Zero(J, M);
    spec.b_x = drift.contains("state") ? parse_matrix(drift["state"], "drift.state")
                                       : Eigen::MatrixXd::Zero(J, J);

    if (!j.contains("sigma") || !j["sigma"].contains("base"))
      throw ConfigError("model file: sigma.base is required");
    spec.sigma_base = parse_matrix(j["sigma"]["base"], "sigma.base");
    if (j["sigma"].contains("alpha"))
      spec.sigma_alpha = parse_matrix_list(j["sigma"]["alpha"], "sigma.alpha");

    spec.elliptic = j.value("elliptic", true);
    (void)N;

    LoadedModel loaded{make_affine_model(std::move(spec)),
                       Functional::zero(J)};

    if (j.contains("functional")) {
      const json& f = j["functional"];
      double c2 = 0.0;
      Eigen::VectorXd l2;
      Eigen::MatrixXd q2;
      if (f.contains("zeta2")) {
        parse_zeta(f["zeta2"], "functional.zeta2", J, c2, l2, q2);
        loaded.functional = Functional::terminal_quadratic(c2, l2, q2);
      }
      if (f.contains("zeta1")) {
        double c1 = 0.0;
        Eigen::VectorXd l1;
        Eigen::MatrixXd q1;
        parse_zeta(f["zeta1"], "functional.zeta1", J, c1, l1, q1);
        const Functional running = Functional::terminal_quadratic(c1, l1, q1);
        loaded.functional.zeta1 = running.zeta2;
        loaded.functional.zeta1_grad = running.zeta2_grad;
      }
    }
    return loaded;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model file: malformed entry: ") + e.what());
  }
}

LoadedModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_model_json(buf.str());
}

}  // namespace rdsens
