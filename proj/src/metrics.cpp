#include "formcast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace formcast {

namespace {

void require_same_shape(const ImageD& a, const ImageD& b, const Image& mask) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != mask.rows() || a.cols() != mask.cols()) {
    throw std::invalid_argument("field and mask shapes differ");
  }
}

double masked_max(const ImageD& field, const Image& mask) {
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < field.size(); ++i) {
    if (mask.data()[i] > 0.5f) best = std::max(best, field.data()[i]);
  }
  return best;
}

}  // namespace

double masked_mse(const ImageD& prediction, const ImageD& truth, const Image& mask) {
  require_same_shape(prediction, truth, mask);
  double sum = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    if (mask.data()[i] > 0.5f) {
      const double e = prediction.data()[i] - truth.data()[i];
      sum += e * e;
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("empty mask");
  return sum / static_cast<double>(count);
}

double mae_max(const ImageD& prediction, const ImageD& truth, const Image& mask) {
  require_same_shape(prediction, truth, mask);
  if ((mask > 0.5f).count() == 0) throw std::invalid_argument("empty mask");
  return std::abs(masked_max(prediction, mask) - masked_max(truth, mask));
}

double mre(const std::vector<ImageD>& predictions, const std::vector<ImageD>& truths,
           const std::vector<Image>& masks) {
  if (predictions.size() != truths.size() || truths.size() != masks.size()) {
    throw std::invalid_argument("mre needs one prediction and one mask per target");
  }
  double err = 0.0;
  double ref = 0.0;
  for (std::size_t k = 0; k < truths.size(); ++k) {
    require_same_shape(predictions[k], truths[k], masks[k]);
    for (Eigen::Index i = 0; i < truths[k].size(); ++i) {
      if (masks[k].data()[i] > 0.5f) {
        err += std::abs(truths[k].data()[i] - predictions[k].data()[i]);
        ref += std::abs(truths[k].data()[i]);
      }
    }
  }
  if (!(ref > 0.0)) throw std::domain_error("relative error undefined for all-zero targets");
  return err / ref;
}

double field_statistic(const ImageD& field, const Image& mask, FieldStatistic stat) {
  if (field.rows() != mask.rows() || field.cols() != mask.cols()) {
    throw std::invalid_argument("field and mask shapes differ");
  }
  const Eigen::Index count = (mask > 0.5f).count();
  if (count == 0) throw std::invalid_argument("empty mask");
  if (stat == FieldStatistic::max) return masked_max(field, mask);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < field.size(); ++i) {
    if (mask.data()[i] > 0.5f) sum += field.data()[i];
  }
  return sum / static_cast<double>(count);
}

double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q, double eps) {
  if (p.size() != q.size() || p.size() == 0) throw std::invalid_argument("mass vectors differ in length");
  if ((p.array() < 0.0).any() || (q.array() < 0.0).any()) throw std::invalid_argument("negative mass");
  const Eigen::ArrayXd ps = (p.array() + eps) / (p.sum() + eps * static_cast<double>(p.size()));
  const Eigen::ArrayXd qs = (q.array() + eps) / (q.sum() + eps * static_cast<double>(q.size()));
  double kl = 0.0;
  for (Eigen::Index i = 0; i < ps.size(); ++i) {
    if (ps[i] != qs[i]) kl += ps[i] * std::log(ps[i] / qs[i]);
  }
  return kl;
}

double kld_histogram(const std::vector<double>& gt, const std::vector<double>& pd, int bins, double eps) {
  if (gt.size() < 2 || pd.size() < 2) throw std::invalid_argument("KLD needs at least 2 samples per side");
  if (bins < 1) throw std::invalid_argument("bin count must be positive");
  const auto [gmin, gmax] = std::minmax_element(gt.begin(), gt.end());
  const auto [pmin, pmax] = std::minmax_element(pd.begin(), pd.end());
  const double lo = std::min(*gmin, *pmin);
  const double hi = std::max(*gmax, *pmax);
  if (!(hi > lo)) throw std::domain_error("degenerate histogram range");
  const auto histogram = [&](const std::vector<double>& values) {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(bins);
    for (const double v : values) {
      const int b = std::clamp(static_cast<int>((v - lo) / (hi - lo) * bins), 0, bins - 1);
      h[b] += 1.0;
    }
    return h;
  };
  return kl_divergence(histogram(gt), histogram(pd), eps);
}

double kld_stats(const std::vector<ImageD>& gt, const std::vector<ImageD>& pd, const std::vector<Image>& masks,
                 FieldStatistic stat, int bins) {
  if (gt.size() != pd.size() || gt.size() != masks.size()) {
    throw std::invalid_argument("kld_stats needs matching GT, PD and mask lists");
  }
  std::vector<double> g;
  std::vector<double> p;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    g.push_back(field_statistic(gt[k], masks[k], stat));
    p.push_back(field_statistic(pd[k], masks[k], stat));
  }
  return kld_histogram(g, p, bins);
}

double sample_bilinear(const ImageD& field, const GridSpec& grid, const Point2& p) {
  const int n = grid.n_pixels;
  if (field.rows() != n || field.cols() != n) throw std::invalid_argument("field does not match the grid");
  // Continuous pixel coordinates, centers at integers.
  const double fx = std::clamp(p.x() / grid.pitch() - 0.5, 0.0, n - 1.0);
  const double fy = std::clamp(p.y() / grid.pitch() - 0.5, 0.0, n - 1.0);
  const int x0 = std::min(static_cast<int>(fx), n - 2);
  const int y0 = std::min(static_cast<int>(fy), n - 2);
  const double tx = fx - x0;
  const double ty = fy - y0;
  return (1 - ty) * ((1 - tx) * field(y0, x0) + tx * field(y0, x0 + 1)) +
         ty * ((1 - tx) * field(y0 + 1, x0) + tx * field(y0 + 1, x0 + 1));
}

Eigen::VectorXd line_cut(const ImageD& field, const GridSpec& grid, const Point2& p_start, const Point2& p_end,
                         int n_points) {
  const int n = grid.n_pixels;
  if (field.rows() != n || field.cols() != n) throw std::invalid_argument("field does not match the grid");
  if (n_points < 2) throw std::invalid_argument("line cut needs at least 2 points");
  if ((p_end - p_start).norm() == 0.0) throw std::invalid_argument("zero-length line cut");
  const auto in_frame = [&](const Point2& p) {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= grid.frame_mm && p.y() <= grid.frame_mm;
  };
  if (!in_frame(p_start) || !in_frame(p_end)) throw std::out_of_range("line cut endpoint outside the frame");

  Eigen::VectorXd out(n_points);
  for (int k = 0; k < n_points; ++k) {
    out[k] = sample_bilinear(field, grid, p_start + (p_end - p_start) * (static_cast<double>(k) / (n_points - 1)));
  }
  return out;
}

int count_local_maxima(const Eigen::VectorXd& profile, double floor) {
  int count = 0;
  for (Eigen::Index i = 1; i + 1 < profile.size(); ++i) {
    if (profile[i] > floor && profile[i] > profile[i - 1] && profile[i] >= profile[i + 1]) ++count;
  }
  return count;
}

}  // namespace formcast
