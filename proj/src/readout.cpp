#include "ross/readout.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>
#include <stdexcept>
#include <string>

namespace ross {

namespace {

std::size_t nearest_point(const std::vector<cplx>& pts, cplx v) {
  std::size_t best = 0;
  double bestd = std::numeric_limits<double>::max();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double d = std::norm(v - pts[i]);
    if (d < bestd) {
      bestd = d;
      best = i;
    }
  }
  return best;
}

/// Distinct axis levels of a constellation (sorted).
std::vector<double> axis_levels(ModFormat format, bool imag_axis) {
  std::set<double> s;
  for (const cplx& p : constellation(format)) {
    s.insert(imag_axis ? p.imag() : p.real());
  }
  return {s.begin(), s.end()};
}

/// Index of the nearest reference in a sorted level list.
std::size_t slice_axis(const std::vector<double>& refs, double v) {
  std::size_t best = 0;
  double bestd = std::numeric_limits<double>::max();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    double d = std::abs(v - refs[i]);
    if (d < bestd) {
      bestd = d;
      best = i;
    }
  }
  return best;
}

std::vector<double> trained_level_means(const Eigen::VectorXd& pred,
                                        const Eigen::VectorXd& truth,
                                        const std::vector<double>& levels) {
  std::vector<double> mean(levels.size(), 0.0);
  std::vector<std::size_t> count(levels.size(), 0);
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    std::size_t k = slice_axis(levels, truth[i]);
    mean[k] += pred[i];
    ++count[k];
  }
  for (std::size_t k = 0; k < levels.size(); ++k) {
    // empty level groups fall back to the ideal position
    mean[k] = count[k] ? mean[k] / count[k] : levels[k];
  }
  return mean;
}

}  // namespace

FeatureMatrix assemble_features(const DecisionSamples& samples,
                                TapWindow window) {
  if (window.pre < 0 || window.post < 0) {
    throw std::invalid_argument("tap window must be non-negative");
  }
  const std::size_t n_out = samples.n_outputs();
  const std::size_t n_sym = samples.n_symbols();
  const int k = window.width();
  if (n_out == 0 || n_sym <= static_cast<std::size_t>(k)) {
    throw std::invalid_argument("trace too short for the tap window (" +
                                std::to_string(n_sym) + " symbols, window " +
                                std::to_string(k) + ")");
  }
  const std::size_t rows = n_sym - window.pre - window.post;
  const std::size_t cols = n_out * k + 1;
  FeatureMatrix f;
  f.first_symbol = window.pre;
  f.x.resize(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t sym = r + window.pre;
    std::size_t c = 0;
    for (std::size_t o = 0; o < n_out; ++o) {
      for (int d = -window.pre; d <= window.post; ++d) {
        f.x(r, c++) = samples.outputs[o][sym + d];
      }
    }
    f.x(r, cols - 1) = 1.0;
  }
  return f;
}

void standardize_features(FeatureMatrix& f, std::size_t n_train_rows) {
  const Eigen::Index rows = f.x.rows();
  const Eigen::Index cols = f.x.cols();
  if (n_train_rows == 0 ||
      n_train_rows > static_cast<std::size_t>(rows)) {
    throw std::invalid_argument("bad training row count");
  }
  if (f.standardized) throw std::logic_error("already standardized");
  const Eigen::Index nt = static_cast<Eigen::Index>(n_train_rows);
  f.col_mean.resize(cols);
  f.col_std.resize(cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    if (c == cols - 1) {  // bias
      f.col_mean[c] = 0.0;
      f.col_std[c] = 1.0;
      continue;
    }
    double m = f.x.col(c).head(nt).mean();
    double v = (f.x.col(c).head(nt).array() - m).square().mean();
    double s = std::sqrt(v);
    if (s < 1e-30) s = 1.0;  // constant column, leave centered only
    f.col_mean[c] = m;
    f.col_std[c] = s;
    f.x.col(c) = (f.x.col(c).array() - m) / s;
  }
  f.standardized = true;
}

Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& y, double lambda) {
  if (x.rows() != y.rows()) {
    throw std::invalid_argument("feature/target row mismatch");
  }
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  const Eigen::Index p = x.cols();
  if (x.rows() < p) {
    std::cerr << "ridge_solve: underdetermined system (" << x.rows()
              << " rows < " << p << " columns)\n";
  }
  if (lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < p) {
      throw std::runtime_error(
          "singular least-squares system with lambda = 0: rank " +
          std::to_string(qr.rank()) + " of " + std::to_string(p));
    }
    return qr.solve(y);
  }
  Eigen::MatrixXd a(x.rows() + p, p);
  a.topRows(x.rows()) = x;
  a.bottomRows(p) =
      std::sqrt(lambda) * Eigen::MatrixXd::Identity(p, p);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(a.rows(), y.cols());
  b.topRows(y.rows()) = y;
  return a.householderQr().solve(b);
}

ReadoutModel train_readout(const FeatureMatrix& f, const Eigen::MatrixXd& y,
                           std::size_t n_train, double lambda,
                           ModFormat format) {
  if (y.rows() != f.x.rows()) {
    throw std::invalid_argument("target rows must match feature rows");
  }
  if (n_train == 0 || n_train > static_cast<std::size_t>(f.x.rows())) {
    throw std::invalid_argument("bad training row count");
  }
  const Eigen::Index nt = static_cast<Eigen::Index>(n_train);
  ReadoutModel m;
  m.weights = ridge_solve(f.x.topRows(nt), y.topRows(nt), lambda);
  m.lambda = lambda;
  m.col_mean = f.col_mean;
  m.col_std = f.col_std;
  m.format = format;
  if (format != ModFormat::analog) {
    Eigen::MatrixXd pred = f.x.topRows(nt) * m.weights;
    m.level_refs_i = trained_level_means(pred.col(0), y.col(0),
                                         axis_levels(format, false));
    if (format != ModFormat::pam4) {
      if (y.cols() < 2) {
        throw std::invalid_argument("QAM targets need two columns");
      }
      m.level_refs_q = trained_level_means(pred.col(1), y.col(1),
                                           axis_levels(format, true));
    }
  }
  return m;
}

Eigen::MatrixXd predict(const ReadoutModel& m, const FeatureMatrix& f) {
  if (f.x.cols() != m.weights.rows()) {
    throw std::invalid_argument("feature width " + std::to_string(f.x.cols()) +
                                " does not match model width " +
                                std::to_string(m.weights.rows()));
  }
  return f.x * m.weights;
}

double select_lambda(const FeatureMatrix& f, const Eigen::MatrixXd& y,
                     std::size_t n_train, ModFormat format) {
  (void)format;
  if (n_train < 8) throw std::invalid_argument("training set too small");
  const Eigen::Index nt = static_cast<Eigen::Index>(n_train);
  const Eigen::Index nfit = nt * 3 / 4;
  const Eigen::Index nval = nt - nfit;
  const double row_power = f.x.topRows(nt).squaredNorm() /
                           static_cast<double>(nt);
  double best_lambda = 1e-6 * row_power;
  double best_mse = std::numeric_limits<double>::max();
  for (double rel : {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1}) {
    double lambda = rel * row_power;
    Eigen::MatrixXd w =
        ridge_solve(f.x.topRows(nfit), y.topRows(nfit), lambda);
    Eigen::MatrixXd err =
        f.x.middleRows(nfit, nval) * w - y.middleRows(nfit, nval);
    double mse = err.squaredNorm() / static_cast<double>(nval);
    if (mse < best_mse) {
      best_mse = mse;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

std::vector<cplx> decide(const Eigen::MatrixXd& estimates,
                         const ReadoutModel& m) {
  if (m.format == ModFormat::analog) {
    throw std::invalid_argument("analog readout has no decision stage");
  }
  const auto& pts = constellation(m.format);
  const std::vector<double> li = axis_levels(m.format, false);
  const std::vector<double> lq = axis_levels(m.format, true);
  std::vector<cplx> out;
  out.reserve(estimates.rows());
  for (Eigen::Index r = 0; r < estimates.rows(); ++r) {
    std::size_t ii = slice_axis(m.level_refs_i, estimates(r, 0));
    if (m.format == ModFormat::pam4) {
      out.push_back({li[ii], 0.0});
      continue;
    }
    std::size_t qq = slice_axis(m.level_refs_q, estimates(r, 1));
    cplx cand{li[ii], lq[qq]};
    // cross constellations: a sliced corner may not exist, snap to nearest
    std::size_t np = nearest_point(pts, cand);
    if (std::norm(pts[np] - cand) > 1e-12) cand = pts[np];
    out.push_back(cand);
  }
  return out;
}

double compute_ser(const std::vector<cplx>& decided,
                   const std::vector<cplx>& reference, ModFormat format) {
  if (decided.size() != reference.size() || decided.empty()) {
    throw std::invalid_argument("sequence length mismatch");
  }
  const auto& pts = constellation(format);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < decided.size(); ++i) {
    if (nearest_point(pts, decided[i]) != nearest_point(pts, reference[i])) {
      ++errors;
    }
  }
  return static_cast<double>(errors) / static_cast<double>(decided.size());
}

double compute_ber(const std::vector<cplx>& decided,
                   const std::vector<cplx>& reference, ModFormat format) {
  if (decided.size() != reference.size() || decided.empty()) {
    throw std::invalid_argument("sequence length mismatch");
  }
  const auto& pts = constellation(format);
  const int bits = bits_per_symbol(format);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < decided.size(); ++i) {
    unsigned a = gray_bits(format, nearest_point(pts, decided[i]));
    unsigned b = gray_bits(format, nearest_point(pts, reference[i]));
    errors += __builtin_popcount(a ^ b);
  }
  return static_cast<double>(errors) /
         static_cast<double>(decided.size() * bits);
}

double compute_nmse(const std::vector<double>& estimate,
                    const std::vector<double>& reference) {
  if (estimate.size() != reference.size() || estimate.empty()) {
    throw std::invalid_argument("sequence length mismatch");
  }
  double mean = 0.0;
  for (double v : reference) mean += v;
  mean /= static_cast<double>(reference.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    num += (estimate[i] - reference[i]) * (estimate[i] - reference[i]);
    den += (reference[i] - mean) * (reference[i] - mean);
  }
  if (den <= 0.0) throw std::invalid_argument("degenerate reference variance");
  return num / den;
}

}  // namespace ross
