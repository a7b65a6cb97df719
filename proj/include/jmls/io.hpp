#pragma once

// File formats: JSON model documents, CSV datasets, mixture-parameter
// records, mode marginals, density grids and likelihood dumps.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jmls/backward.hpp"
#include "jmls/likelihood.hpp"
#include "jmls/mixture.hpp"
#include "jmls/model.hpp"
#include "jmls/oracle.hpp"
#include "jmls/smoother.hpp"

namespace jmls {

using Json = nlohmann::json;

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline Matrix matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) throw FormatError(what + ": expected nested array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw FormatError(what + ": ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return out;
}

inline Vector vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw FormatError(what + ": expected array");
  Vector out(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) out(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return out;
}

inline Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

inline Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw FormatError(what + ": trailing characters in '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw FormatError(what + ": cannot parse number '" + s + "'");
  }
}

inline void set_precision(std::ostream& os) { os << std::setprecision(std::numeric_limits<double>::max_digits10); }

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  set_precision(os);
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open '" + path + "' for reading");
  return is;
}

}  // namespace detail

struct ModelDocument {
  JmlsModel model;
  HybridPrior prior;
};

/// Model document layout:
///   { "n", "p", "q", "m", "timing",
///     "modes": [ { "A", "B", "C", "D", "Q", "R" } ],       matrices as row arrays
///     "T": [ [T(1|1), T(2|1), ...], [T(1|2), ...], ... ],  T[j][i] = T(i|j)
///     "prior": [ { "mode", "weight", "mean", "cov" } ] }    mode is 1-based
inline ModelDocument model_from_json(const Json& j) {
  ModelDocument doc;
  try {
    const auto n = j.at("n").get<Eigen::Index>();
    const auto p = j.at("p").get<Eigen::Index>();
    const auto q = j.at("q").get<Eigen::Index>();
    const auto m = j.at("m").get<std::size_t>();
    doc.model.timing = timing_from_string(j.value("timing", std::string("switch-after-prediction")));
    const auto& modes = j.at("modes");
    if (modes.size() != m) throw FormatError("model: 'modes' length differs from m");
    for (std::size_t z = 0; z < m; ++z) {
      const auto& mj = modes[z];
      const std::string tag = "mode " + std::to_string(z + 1);
      ModeParams mp;
      mp.A = detail::matrix_from_json(mj.at("A"), tag + " A");
      mp.B = detail::matrix_from_json(mj.at("B"), tag + " B");
      mp.C = detail::matrix_from_json(mj.at("C"), tag + " C");
      mp.D = detail::matrix_from_json(mj.at("D"), tag + " D");
      mp.Q = detail::matrix_from_json(mj.at("Q"), tag + " Q");
      mp.R = detail::matrix_from_json(mj.at("R"), tag + " R");
      const bool conforms = mp.A.rows() == n && mp.A.cols() == n && mp.B.rows() == n && mp.B.cols() == p &&
                            mp.C.rows() == q && mp.C.cols() == n && mp.D.rows() == q && mp.D.cols() == p &&
                            mp.Q.rows() == n && mp.Q.cols() == n && mp.R.rows() == q && mp.R.cols() == q;
      if (!conforms) throw FormatError(tag + ": dimensions differ from n, p, q");
      doc.model.modes.push_back(std::move(mp));
    }
    const auto& tj = j.at("T");
    if (tj.size() != m) throw FormatError("model: 'T' must have m columns");
    doc.model.transition = Matrix(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t from = 0; from < m; ++from) {
      if (tj[from].size() != m) throw FormatError("model: 'T' column " + std::to_string(from + 1) + " length");
      for (std::size_t to = 0; to < m; ++to) {
        doc.model.transition(static_cast<Eigen::Index>(to), static_cast<Eigen::Index>(from)) = tj[from][to].get<double>();
      }
    }
    doc.prior = GaussianMixture(m);
    if (j.contains("prior")) {
      for (const auto& c : j.at("prior")) {
        const auto mode = c.at("mode").get<std::size_t>();
        if (mode < 1 || mode > m) throw FormatError("prior: mode index out of range");
        doc.prior.modes[mode - 1].push_back(GaussianComponent::from_weight(
            c.at("weight").get<double>(), detail::vector_from_json(c.at("mean"), "prior mean"),
            detail::matrix_from_json(c.at("cov"), "prior cov")));
      }
    }
  } catch (const Json::exception& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
  return doc;
}

inline Json model_to_json(const JmlsModel& model, const HybridPrior& prior) {
  Json j;
  j["n"] = model.n();
  j["p"] = model.p();
  j["q"] = model.q();
  j["m"] = model.m();
  j["timing"] = std::string(to_string(model.timing));
  Json modes = Json::array();
  for (const auto& mp : model.modes) {
    modes.push_back({{"A", detail::to_json(mp.A)},
                     {"B", detail::to_json(mp.B)},
                     {"C", detail::to_json(mp.C)},
                     {"D", detail::to_json(mp.D)},
                     {"Q", detail::to_json(mp.Q)},
                     {"R", detail::to_json(mp.R)}});
  }
  j["modes"] = std::move(modes);
  Json T = Json::array();
  for (std::size_t from = 0; from < model.m(); ++from) {
    Json col = Json::array();
    for (std::size_t to = 0; to < model.m(); ++to) col.push_back(model.T(to, from));
    T.push_back(std::move(col));
  }
  j["T"] = std::move(T);
  Json pj = Json::array();
  for (std::size_t z = 0; z < prior.mode_count(); ++z) {
    for (const auto& c : prior.modes[z]) {
      pj.push_back({{"mode", z + 1},
                    {"weight", c.weight()},
                    {"mean", detail::to_json(c.mean)},
                    {"cov", detail::to_json(c.cov)}});
    }
  }
  j["prior"] = std::move(pj);
  return j;
}

inline ModelDocument read_model(const std::string& path) {
  auto is = detail::open_in(path);
  Json j;
  try {
    is >> j;
  } catch (const Json::exception& e) {
    throw FormatError("model '" + path + "': " + e.what());
  }
  return model_from_json(j);
}

inline void write_model(const std::string& path, const JmlsModel& model, const HybridPrior& prior) {
  auto os = detail::open_out(path);
  os << model_to_json(model, prior).dump(2) << '\n';
}

/// CSV with header t,u_1..u_p,y_1..y_q and, when truth is present,
/// x_1..x_n,z. Time and mode indices are 1-based.
inline void write_dataset(std::ostream& os, const Dataset& data) {
  detail::set_precision(os);
  const Eigen::Index p = data.u.empty() ? 0 : data.u.front().size();
  const Eigen::Index q = data.y.empty() ? 0 : data.y.front().size();
  const Eigen::Index n = data.truth && !data.truth->x.empty() ? data.truth->x.front().size() : 0;
  os << 't';
  for (Eigen::Index i = 0; i < p; ++i) os << ",u_" << i + 1;
  for (Eigen::Index i = 0; i < q; ++i) os << ",y_" << i + 1;
  if (data.truth) {
    for (Eigen::Index i = 0; i < n; ++i) os << ",x_" << i + 1;
    os << ",z";
  }
  os << '\n';
  for (std::size_t k = 0; k < data.size(); ++k) {
    os << k + 1;
    for (Eigen::Index i = 0; i < p; ++i) os << ',' << data.u[k](i);
    for (Eigen::Index i = 0; i < q; ++i) os << ',' << data.y[k](i);
    if (data.truth) {
      for (Eigen::Index i = 0; i < n; ++i) os << ',' << data.truth->x[k](i);
      os << ',' << data.truth->z[k] + 1;
    }
    os << '\n';
  }
}

inline void write_dataset(const std::string& path, const Dataset& data) {
  auto os = detail::open_out(path);
  write_dataset(os, data);
}

inline Dataset read_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("dataset: missing header");
  const auto header = detail::split(line, ',');
  std::vector<std::size_t> ucol, ycol, xcol;
  std::optional<std::size_t> zcol;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h.rfind("u_", 0) == 0) ucol.push_back(c);
    else if (h.rfind("y_", 0) == 0) ycol.push_back(c);
    else if (h.rfind("x_", 0) == 0) xcol.push_back(c);
    else if (h == "z") zcol = c;
    else if (h != "t") throw FormatError("dataset: unknown column '" + h + "'");
  }
  if (ycol.empty()) throw FormatError("dataset: no output columns");
  if (xcol.empty() != !zcol.has_value()) throw FormatError("dataset: truth needs both x and z columns");

  Dataset data;
  if (zcol) data.truth = Truth{};
  auto pick = [](const std::vector<std::string>& cells, const std::vector<std::size_t>& cols, std::size_t row) {
    Vector v(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) {
      v(static_cast<Eigen::Index>(i)) = detail::parse_double(cells[cols[i]], "dataset row " + std::to_string(row));
    }
    return v;
  };
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ++row;
    const auto cells = detail::split(line, ',');
    if (cells.size() != header.size()) throw FormatError("dataset row " + std::to_string(row) + ": wrong cell count");
    data.u.push_back(pick(cells, ucol, row));
    data.y.push_back(pick(cells, ycol, row));
    if (zcol) {
      data.truth->x.push_back(pick(cells, xcol, row));
      const double z = detail::parse_double(cells[*zcol], "dataset z");
      if (z < 1.0 || z != std::floor(z)) throw FormatError("dataset row " + std::to_string(row) + ": bad mode index");
      data.truth->z.push_back(static_cast<std::size_t>(z) - 1);
    }
  }
  if (data.size() == 0) throw FormatError("dataset: no rows");
  return data;
}

inline Dataset read_dataset(const std::string& path) {
  auto is = detail::open_in(path);
  return read_dataset(is);
}

/// Per-step mixture parameters, one record per (k, mode, component).
struct MixtureSeries {
  Eigen::Index n = 0;
  std::size_t m = 0;
  std::vector<GaussianMixture> steps;
};

inline void write_mixtures(std::ostream& os, const std::vector<GaussianMixture>& steps) {
  detail::set_precision(os);
  const Eigen::Index n = steps.empty() ? 0 : steps.front().dim();
  const std::size_t m = steps.empty() ? 0 : steps.front().mode_count();
  os << "# n=" << n << " m=" << m << " N=" << steps.size() << '\n';
  os << "k,mode,component,log_weight";
  for (Eigen::Index i = 0; i < n; ++i) os << ",mu_" << i + 1;
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) os << ",P_" << r + 1 << '_' << c + 1;
  }
  os << '\n';
  for (std::size_t k = 0; k < steps.size(); ++k) {
    for (std::size_t z = 0; z < steps[k].mode_count(); ++z) {
      const auto& mode = steps[k].modes[z];
      for (std::size_t i = 0; i < mode.size(); ++i) {
        const auto& c = mode[i];
        os << k + 1 << ',' << z + 1 << ',' << i + 1 << ',' << c.log_weight;
        for (Eigen::Index d = 0; d < n; ++d) os << ',' << c.mean(d);
        for (Eigen::Index r = 0; r < n; ++r) {
          for (Eigen::Index cc = 0; cc < n; ++cc) os << ',' << c.cov(r, cc);
        }
        os << '\n';
      }
    }
  }
}

inline void write_mixtures(const std::string& path, const std::vector<GaussianMixture>& steps) {
  auto os = detail::open_out(path);
  write_mixtures(os, steps);
}

inline MixtureSeries read_mixtures(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw FormatError("mixtures: missing '# n= m= N=' header");
  MixtureSeries out;
  std::size_t N = 0;
  {
    std::istringstream hs(line.substr(2));
    std::string tok;
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw FormatError("mixtures: malformed header token '" + tok + "'");
      const auto key = tok.substr(0, eq);
      const auto val = static_cast<std::size_t>(detail::parse_double(tok.substr(eq + 1), "mixtures header"));
      if (key == "n") out.n = static_cast<Eigen::Index>(val);
      else if (key == "m") out.m = val;
      else if (key == "N") N = val;
    }
  }
  if (!std::getline(is, line)) throw FormatError("mixtures: missing column header");
  out.steps.assign(N, GaussianMixture(out.m));
  const std::size_t expected = 4 + static_cast<std::size_t>(out.n + out.n * out.n);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != expected) throw FormatError("mixtures: wrong cell count");
    const auto k = static_cast<std::size_t>(detail::parse_double(cells[0], "mixtures k"));
    const auto z = static_cast<std::size_t>(detail::parse_double(cells[1], "mixtures mode"));
    if (k < 1 || k > N || z < 1 || z > out.m) throw FormatError("mixtures: index out of range");
    GaussianComponent c;
    c.log_weight = detail::parse_double(cells[3], "mixtures log_weight");
    c.mean = Vector(out.n);
    c.cov = Matrix(out.n, out.n);
    std::size_t at = 4;
    for (Eigen::Index d = 0; d < out.n; ++d) c.mean(d) = detail::parse_double(cells[at++], "mixtures mean");
    for (Eigen::Index r = 0; r < out.n; ++r) {
      for (Eigen::Index cc = 0; cc < out.n; ++cc) c.cov(r, cc) = detail::parse_double(cells[at++], "mixtures cov");
    }
    out.steps[k - 1].modes[z - 1].push_back(std::move(c));
  }
  return out;
}

inline MixtureSeries read_mixtures(const std::string& path) {
  auto is = detail::open_in(path);
  return read_mixtures(is);
}

inline std::vector<GaussianMixture> smoothed_mixtures(const std::vector<SmoothedState>& states) {
  std::vector<GaussianMixture> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.mixture);
  return out;
}

inline void write_mode_marginals(std::ostream& os, const std::vector<SmoothedState>& states) {
  detail::set_precision(os);
  const std::size_t m = states.empty() ? 0 : states.front().mode_marginal.size();
  os << 'k';
  for (std::size_t z = 0; z < m; ++z) os << ",p_" << z + 1;
  os << '\n';
  for (const auto& s : states) {
    os << s.k + 1;
    for (double p : s.mode_marginal) os << ',' << p;
    os << '\n';
  }
}

inline void write_mode_marginals(const std::string& path, const std::vector<SmoothedState>& states) {
  auto os = detail::open_out(path);
  write_mode_marginals(os, states);
}

/// Grid CSV: one column per axis followed by one density column per mode.
inline void write_grid(std::ostream& os, const DensityGrid& grid) {
  detail::set_precision(os);
  for (std::size_t a = 0; a < grid.axes.size(); ++a) os << (a ? "," : "") << "x_" << a + 1;
  for (std::size_t z = 0; z < grid.values.size(); ++z) os << ",density_" << z + 1;
  os << '\n';
  const std::size_t inner = grid.axes.size() == 2 ? grid.axes[1].count : 1;
  for (std::size_t i = 0; i < grid.point_count(); ++i) {
    if (grid.axes.size() == 2) os << grid.axes[0].at(i / inner) << ',' << grid.axes[1].at(i % inner);
    else os << grid.axes[0].at(i);
    for (const auto& mode : grid.values) os << ',' << mode[i];
    os << '\n';
  }
}

inline void write_grid(const std::string& path, const DensityGrid& grid) {
  auto os = detail::open_out(path);
  write_grid(os, grid);
}

/// Debug dump of backward likelihood components: one record per
/// (k, stage, mode, component) with r, s and row-major L.
inline void write_likelihoods(std::ostream& os, const std::vector<BackwardState>& states) {
  detail::set_precision(os);
  os << "k,stage,mode,component,r,s...,L...\n";
  for (const auto& st : states) {
    for (const auto* stage : {&st.propagated, &st.corrected}) {
      const char* name = stage == &st.propagated ? "propagated" : "corrected";
      for (std::size_t z = 0; z < stage->mode_count(); ++z) {
        for (std::size_t i = 0; i < stage->modes[z].size(); ++i) {
          const auto& c = stage->modes[z][i];
          os << st.k + 1 << ',' << name << ',' << z + 1 << ',' << i + 1 << ',' << c.r;
          for (Eigen::Index d = 0; d < c.s.size(); ++d) os << ',' << c.s(d);
          for (Eigen::Index r = 0; r < c.L.rows(); ++r) {
            for (Eigen::Index cc = 0; cc < c.L.cols(); ++cc) os << ',' << c.L(r, cc);
          }
          os << '\n';
        }
      }
    }
  }
}

inline void write_likelihoods(const std::string& path, const std::vector<BackwardState>& states) {
  auto os = detail::open_out(path);
  write_likelihoods(os, states);
}

}  // namespace jmls
