#include "cfpa/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cfpa {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Fixed-capacity storage keeps the per-node state off the heap.
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kGridSearchMaxDimension, 1>;
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kGridSearchMaxDimension,
                               kGridSearchMaxDimension>;

// Linearization of a convex g_k: every feasible x has a^T x <= h.
struct Cut {
  SmallVec a;
  double h = 0.0;
};

// Exact lattice search state. Coordinates follow the x layout; the last
// coordinate is resolved in closed loop by `best_last`.
class LatticeSearch {
 public:
  LatticeSearch(const ProblemData& data, PowerModel model, double resolution)
      : data_(data), model_(model), res_(resolution), d_(data.dimension()) {
    const int K = data.num_users;
    const int L = data.num_aps;
    full_c_.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d_, d_);
      for (int i = 0; i < K; ++i) c.block(i * L, i * L, L, L) = data.block(k, i);
      full_c_[static_cast<std::size_t>(k)] = std::move(c);
    }
    factor_.resize(K);
    for (int k = 0; k < K; ++k) factor_(k) = data.target_factor(k);
    s2_ = data.sigma_dl * data.sigma_dl;
    cap2_ = data.p_max * (1.0 + 1e-12);
    coupling_.resize(K, K);
    for (int k = 0; k < K; ++k) {
      for (int i = 0; i < K; ++i) coupling_(k, i) = coupling_factor(data.block(k, i), data.b.row(i));
    }
    max_index_ = static_cast<long long>(std::floor(std::sqrt(data.p_max) / res_ + 1e-9));
    weight_ = model == PowerModel::Ideal ? 1.0 / data.eta : std::sqrt(data.p_max) / data.eta_max;
  }

  void seed(const std::vector<long long>& idx, double objective) {
    best_idx_ = idx;
    best_obj_ = objective;
  }

  // Linearizations of every g_k at x_hat; g_k convex makes each
  // a^T x <= h a necessary condition for feasibility.
  void add_cuts(const Eigen::VectorXd& x_hat) {
    for (int k = 0; k < data_.num_users; ++k) cuts_.push_back(make_cut(x_hat, k));
  }

  void add_cuts(const std::vector<Cut>& cuts) { cuts_.insert(cuts_.end(), cuts.begin(), cuts.end()); }
  const std::vector<Cut>& cuts() const { return cuts_; }

  void run() {
    State root;
    root.q = SmallVec::Zero(data_.num_users);
    root.lin = SmallVec::Zero(data_.num_users);
    root.x = SmallVec::Zero(d_);
    root.v = SmallMat::Zero(d_, data_.num_users);
    root.apn = SmallVec::Zero(data_.num_aps);
    root.done_q = SmallVec::Zero(data_.num_users);
    std::vector<long long> idx(static_cast<std::size_t>(d_), 0);
    descend(0, root, idx);
  }

  long long evaluations() const { return evaluations_; }
  double best_objective() const { return best_obj_; }
  const std::vector<long long>& best_index() const { return best_idx_; }
  long long max_index() const { return max_index_; }

 private:
  Cut make_cut(const Eigen::VectorXd& x_hat, int k) const {
    const auto& c = full_c_[static_cast<std::size_t>(k)];
    const Eigen::VectorXd cx = c * x_hat;
    const double root = std::sqrt(std::max(x_hat.dot(cx), 0.0) + s2_);
    Cut cut;
    cut.a = cx / root - factor_(k) * data_.b_tilde.col(k);
    cut.h = -s2_ / root;
    return cut;
  }

  struct State {
    SmallVec q;    // x^T C_k x
    SmallVec lin;  // b_tilde_k^T x
    SmallVec x;
    SmallMat v;    // column k: C_k x
    SmallVec apn;  // ||x_l||^2
    SmallVec done_q;  // sum over completed users i != k of x_i^T C_ki x_i
  };

  // Largest e with C - e b b^T PSD, shrunk slightly, so that
  // rho^T C rho >= e (b^T rho)^2 for every rho.
  static double coupling_factor(const Eigen::MatrixXd& c, const Eigen::VectorXd& b) {
    if (b.squaredNorm() == 0.0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (c + c.transpose()));
    const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
    double quad = 0.0;
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      const double lam = eig.eigenvalues()(i);
      const double proj = eig.eigenvectors().col(i).dot(b);
      if (lam <= 1e-12 * top) {
        if (proj * proj > 1e-24 * b.squaredNorm()) return 0.0;
        continue;
      }
      quad += proj * proj / lam;
    }
    return quad == 0.0 ? 0.0 : (1.0 - 1e-6) / quad;
  }

  // Adds the contributions of user u once its last coordinate is fixed.
  void complete_user(State& s, int u) const {
    const int L = data_.num_aps;
    const int K = data_.num_users;
    for (int k = 0; k < K; ++k) {
      if (k == u) continue;
      const auto& c = full_c_[static_cast<std::size_t>(k)];
      double q = 0.0;
      for (int a = 0; a < L; ++a) {
        for (int b = 0; b < L; ++b) q += s.x(u * L + a) * c(u * L + a, u * L + b) * s.x(u * L + b);
      }
      s.done_q(k) += std::max(q, 0.0);
    }
  }

  // Lower bound on the objective over every completion of the coordinates
  // from `next` on. Each user's signal b_k^T rho_k must reach
  // sqrt((interference + sigma^2) / (t_k^2 - e_kk)); interference from users
  // still open is bounded by e_ki times their own signal floor, and the floors
  // are tightened jointly. +inf when some target is out of reach.
  double completion_bound(const State& s, int next) const {
    const int L = data_.num_aps;
    const int K = data_.num_users;
    const int completed = next / L;
    SmallVec floor = s.lin;
    for (int sweep = 0; sweep < 8; ++sweep) {
      bool moved = false;
      for (int k = 0; k < K; ++k) {
        double inter = s.done_q(k);
        for (int i = completed; i < K; ++i) {
          if (i != k) inter += coupling_(k, i) * floor(i) * floor(i);
        }
        const double denom = factor_(k) * factor_(k) - coupling_(k, k);
        if (!(denom > 0.0)) return kInf;
        const double required = std::sqrt((inter + s2_) / denom);
        if (k < completed) {
          if (required > s.lin(k) * (1.0 + 1e-9)) return kInf;
          continue;
        }
        if (required > floor(k) * (1.0 + 1e-9)) {
          floor(k) = required;
          moved = true;
        }
      }
      if (!moved) break;
    }

    const SmallVec norms = s.apn.cwiseSqrt();
    // Objective left before the incumbent is reached caps every open amplitude.
    const double spent = model_ == PowerModel::Ideal ? s.apn.sum() : norms.sum();
    const double budget = std::isfinite(best_obj_) ? best_obj_ / weight_ - spent : kInf;
    if (budget < 0.0) return kInf;
    auto amplitude = [&](int l) {
      double amp = std::sqrt(std::max(cap2_ - s.apn(l), 0.0));
      if (std::isfinite(budget)) {
        const double within = model_ == PowerModel::Ideal
                                  ? std::sqrt(budget)
                                  : std::sqrt(budget * (budget + 2.0 * norms(l)));
        amp = std::min(amp, within * (1.0 + 1e-9));
      }
      return amp;
    };

    double spread = 0.0;  // largest single-requirement increment
    double pooled = 0.0;  // squared per-user amplitude sums
    double ideal_sum = 0.0;
    double ideal_max = 0.0;
    for (int k = completed; k < K; ++k) {
      const double need = floor(k) - s.lin(k);
      if (need <= 0.0) continue;
      double reach = 0.0;
      double free_signal = 0.0;
      double best_gain = 0.0;
      double gain2 = 0.0;
      for (int l = std::max(0, next - k * L); l < L; ++l) {
        const double b = data_.b(k, l);
        reach += b * amplitude(l);
        free_signal += b * norms(l);
        best_gain = std::max(best_gain, b);
        gain2 += b * b;
      }
      if (reach < need * (1.0 - 1e-9)) return kInf;
      spread = std::max(spread, std::max(need - free_signal, 0.0) / best_gain);
      pooled += (need / best_gain) * (need / best_gain);
      ideal_sum += need * need / gain2;
    }

    // Tangent cuts: sum over open j of (-a_j) x_j must cover the shortfall.
    for (const Cut& cut : cuts_) {
      double fixed = 0.0;
      double scale = std::abs(cut.h);
      for (int j = 0; j < next; ++j) {
        fixed += cut.a(j) * s.x(j);
        scale += std::abs(cut.a(j) * s.x(j));
      }
      const double need = fixed - cut.h - 1e-9 * scale;
      if (need <= 0.0) continue;
      double reach = 0.0;
      double free_signal = 0.0;
      double best_gain = 0.0;
      double gain2 = 0.0;
      for (int j = next; j < d_; ++j) {
        const double w = -cut.a(j);
        if (w <= 0.0) continue;
        reach += w * amplitude(ap_of(j));
        free_signal += w * norms(ap_of(j));
        best_gain = std::max(best_gain, w);
        gain2 += w * w;
      }
      if (reach < need) return kInf;
      spread = std::max(spread, std::max(need - free_signal, 0.0) / best_gain);
      ideal_max = std::max(ideal_max, need * need / gain2);
    }

    double bound = 0.0;
    if (model_ == PowerModel::Ideal) {
      bound = s.apn.sum() + std::max(ideal_sum, ideal_max);
    } else {
      const double base = norms.sum();
      bound = std::max(base + spread, std::sqrt(base * base + pooled));
    }
    return weight_ * bound * (1.0 - 1e-12);
  }

  int ap_of(int j) const { return j % data_.num_aps; }

  double objective(const SmallVec& apn) const {
    if (model_ == PowerModel::Ideal) return weight_ * apn.sum();
    return weight_ * apn.cwiseSqrt().sum();
  }

  // State with coordinate j moved from 0 to `value`.
  State with_coordinate(const State& s, int j, double value) const {
    State out = s;
    for (int k = 0; k < data_.num_users; ++k) {
      const auto& c = full_c_[static_cast<std::size_t>(k)];
      out.q(k) += 2.0 * value * s.v(j, k) + value * value * c(j, j);
      out.v.col(k) += value * c.col(j);
      out.lin(k) += value * data_.b_tilde(j, k);
    }
    out.apn(ap_of(j)) += value * value;
    out.x(j) = value;
    return out;
  }

  long long cap_index(const State& s, int j) const {
    const double room = cap2_ - s.apn(ap_of(j));
    if (room < 0.0) return -1;
    long long n = static_cast<long long>(std::floor(std::sqrt(room) / res_ + 1e-9));
    n = std::min(n, max_index_);
    while (n > 0 && s.apn(ap_of(j)) + (n * res_) * (n * res_) > cap2_) --n;
    return n;
  }

  double objective_with_last(const State& s, long long n) const {
    SmallVec apn = s.apn;
    const double value = static_cast<double>(n) * res_;
    apn(ap_of(d_ - 1)) += value * value;
    return objective(apn);
  }

  // max_k g_k with the last coordinate at lattice index n.
  double worst_margin(const State& s, long long n) {
    ++evaluations_;
    const int t = d_ - 1;
    const double value = static_cast<double>(n) * res_;
    double worst = -kInf;
    for (int k = 0; k < data_.num_users; ++k) {
      const auto& c = full_c_[static_cast<std::size_t>(k)];
      const double q = s.q(k) + 2.0 * value * s.v(t, k) + value * value * c(t, t);
      const double lin = s.lin(k) + value * data_.b_tilde(t, k);
      worst = std::max(worst, std::sqrt(std::max(q, 0.0) + s2_) - factor_(k) * lin);
    }
    return worst;
  }

  void descend(int j, const State& s, std::vector<long long>& idx) {
    if (j == d_ - 1) {
      resolve_last(s, idx);
      return;
    }
    long long n_max = cap_index(s, j);
    long long n_min = 0;
    if (!cut_window(s, j, n_min, n_max)) return;
    const int L = data_.num_aps;
    for (long long n = n_min; n <= n_max; ++n) {
      State next = n == 0 ? s : with_coordinate(s, j, static_cast<double>(n) * res_);
      if (objective(next.apn) > best_obj_) break;
      if ((j + 1) % L == 0) complete_user(next, j / L);
      if (completion_bound(next, j + 1) > best_obj_) continue;
      idx[static_cast<std::size_t>(j)] = n;
      descend(j + 1, next, idx);
    }
    idx[static_cast<std::size_t>(j)] = 0;
  }

  // Narrows [lo, hi] for coordinate j using every cut, with the coordinates
  // after j free in [0, amplitude]. False when the window is empty.
  bool cut_window(const State& s, int j, long long& lo, long long& hi) const {
    if (cuts_.empty()) return lo <= hi;
    const SmallVec norms = s.apn.cwiseSqrt();
    const double spent = model_ == PowerModel::Ideal ? s.apn.sum() : norms.sum();
    const double budget = std::isfinite(best_obj_) ? best_obj_ / weight_ - spent : kInf;
    SmallVec amp(d_);
    for (int i = j + 1; i < d_; ++i) {
      const int l = ap_of(i);
      double a = std::sqrt(std::max(cap2_ - s.apn(l), 0.0));
      if (std::isfinite(budget)) {
        const double within = model_ == PowerModel::Ideal
                                  ? std::sqrt(std::max(budget, 0.0))
                                  : std::sqrt(std::max(budget * (budget + 2.0 * norms(l)), 0.0));
        a = std::min(a, within * (1.0 + 1e-9));
      }
      amp(i) = a;
    }
    for (const Cut& cut : cuts_) {
      double room = cut.h;
      double scale = std::abs(cut.h);
      for (int i = 0; i < j; ++i) {
        room -= cut.a(i) * s.x(i);
        scale += std::abs(cut.a(i) * s.x(i));
      }
      for (int i = j + 1; i < d_; ++i) {
        if (cut.a(i) < 0.0) {
          room -= cut.a(i) * amp(i);
          scale += std::abs(cut.a(i) * amp(i));
        }
      }
      room += 1e-9 * scale;
      const double a = cut.a(j);
      if (a > 0.0) {
        if (room < 0.0) return false;
        const double limit = std::floor(room / a / res_);
        if (limit < static_cast<double>(hi)) hi = static_cast<long long>(limit);
      } else if (a < 0.0) {
        const double limit = std::ceil(room / a / res_);
        if (limit > static_cast<double>(hi)) return false;
        if (limit > static_cast<double>(lo)) lo = static_cast<long long>(limit);
      } else if (room < 0.0) {
        return false;
      }
    }
    return lo <= hi;
  }

  // Adds the cut of the most violated constraint at the infeasible leaf
  // with last index n, while the cut list has room.
  void learn(const State& s, long long n) {
    if (static_cast<int>(cuts_.size()) >= kMaxCuts) return;
    Eigen::VectorXd x = s.x;
    x(d_ - 1) = static_cast<double>(n) * res_;
    int worst_k = 0;
    double worst = -kInf;
    for (int k = 0; k < data_.num_users; ++k) {
      const double g = constraint_g(x, k, data_);
      if (g > worst) {
        worst = g;
        worst_k = k;
      }
    }
    cuts_.push_back(make_cut(x, worst_k));
  }

  void resolve_last(const State& s, std::vector<long long>& idx) {
    const int t = d_ - 1;
    const long long n_max = cap_index(s, t);
    if (n_max < 0) return;
    if (objective(s.apn) > best_obj_) return;

    // Only indices whose objective stays within the incumbent matter.
    long long top = n_max;
    if (std::isfinite(best_obj_) && objective_with_last(s, n_max) > best_obj_) {
      long long lo = 0;
      long long hi = n_max;
      while (lo < hi) {
        const long long mid = lo + (hi - lo + 1) / 2;
        if (objective_with_last(s, mid) <= best_obj_) {
          lo = mid;
        } else {
          hi = mid - 1;
        }
      }
      top = lo;
    }

    // Cuts confine the last coordinate to a window.
    long long bottom = 0;
    for (const Cut& cut : cuts_) {
      double fixed = 0.0;
      double scale = std::abs(cut.h);
      for (int j = 0; j < t; ++j) {
        fixed += cut.a(j) * s.x(j);
        scale += std::abs(cut.a(j) * s.x(j));
      }
      const double room = cut.h - fixed + 1e-9 * scale;
      const double a = cut.a(t);
      if (a > 0.0) {
        if (room < 0.0) return;
        const double limit = std::floor(room / a / res_);
        if (limit < static_cast<double>(top)) top = static_cast<long long>(limit);
      } else if (a < 0.0) {
        const double limit = std::ceil(room / a / res_);
        if (limit > static_cast<double>(top)) return;
        if (limit > static_cast<double>(bottom)) bottom = static_cast<long long>(limit);
      } else if (room < 0.0) {
        return;
      }
    }
    if (bottom > top) return;

    // The feasible set along one coordinate is an interval and max_k g_k is
    // convex there: locate its minimizer, then the first feasible index.
    long long first = -1;
    const double at_bottom = worst_margin(s, bottom);
    if (at_bottom <= 0.0) {
      first = bottom;
    } else {
      if (top == bottom || worst_margin(s, bottom + 1) >= at_bottom) {
        learn(s, bottom);
        return;
      }
      const double at_top = worst_margin(s, top);
      if (at_top > 0.0 && at_top < worst_margin(s, top - 1)) {
        learn(s, top);
        return;
      }
      long long lo = bottom;
      long long hi = top;
      while (lo < hi) {
        const long long mid = lo + (hi - lo) / 2;
        if (worst_margin(s, mid + 1) - worst_margin(s, mid) >= 0.0) {
          hi = mid;
        } else {
          lo = mid + 1;
        }
      }
      if (worst_margin(s, lo) > 0.0) {
        learn(s, lo);
        return;
      }
      long long a = bottom;
      long long b = lo;
      while (a < b) {
        const long long mid = a + (b - a) / 2;
        if (worst_margin(s, mid) <= 0.0) {
          b = mid;
        } else {
          a = mid + 1;
        }
      }
      first = a;
    }

    SmallVec apn = s.apn;
    const double value = static_cast<double>(first) * res_;
    apn(ap_of(t)) += value * value;
    const double obj = objective(apn);
    idx[static_cast<std::size_t>(t)] = first;
    if (obj < best_obj_ || (obj == best_obj_ && idx < best_idx_)) {
      best_obj_ = obj;
      best_idx_ = idx;
    }
    idx[static_cast<std::size_t>(t)] = 0;
  }

  const ProblemData& data_;
  PowerModel model_;
  double res_;
  int d_;
  std::vector<Eigen::MatrixXd> full_c_;
  Eigen::VectorXd factor_;
  Eigen::MatrixXd coupling_;
  std::vector<Cut> cuts_;
  static constexpr int kMaxCuts = 64;
  double s2_ = 1.0;
  double cap2_ = 1.0;
  double weight_ = 1.0;
  long long max_index_ = 0;
  long long evaluations_ = 0;
  double best_obj_ = kInf;
  std::vector<long long> best_idx_;
};

}  // namespace

OracleReport single_link_closed_form(const ProblemData& data, PowerModel model) {
  if (data.num_users != 1 || data.num_aps != 1) {
    throw std::invalid_argument("single_link_closed_form: requires K = L = 1");
  }
  if (!data.has_targets()) throw std::invalid_argument("single_link_closed_form: no target");
  const double b = data.b(0, 0);
  if (!(b > 0.0)) throw std::invalid_argument("single_link_closed_form: requires b > 0");
  const double c = data.block(0, 0)(0, 0);
  const double gamma = data.gamma_bar(0);
  const double s2 = data.sigma_dl * data.sigma_dl;

  OracleReport r;
  r.x_best = Eigen::VectorXd::Zero(1);
  r.evaluations = 1;
  const double denom = b * b - gamma * (c - b * b);
  const double rho2 = gamma * s2 / denom;
  if (denom > 0.0 && rho2 <= data.p_max) {
    r.x_best(0) = std::sqrt(rho2);
    r.feasible = true;
    r.objective = consumed_power(r.x_best, model, data).total;
  } else {
    r.objective = kInf;
  }
  return r;
}

OracleReport grid_search(const ProblemData& data, double resolution, PowerModel model) {
  if (!data.has_targets()) throw std::invalid_argument("grid_search: no targets");
  if (!(resolution > 0.0)) throw std::invalid_argument("grid_search: resolution must be > 0");
  if (data.dimension() > kGridSearchMaxDimension) {
    throw std::invalid_argument("grid_search: K*L = " + std::to_string(data.dimension()) +
                                " exceeds " + std::to_string(kGridSearchMaxDimension));
  }

  // Nested coarse passes: a lattice with step 2^m r is a subset of the fine
  // one, so its optimum is a valid incumbent for the next finer pass.
  const long long fine_max = static_cast<long long>(std::floor(std::sqrt(data.p_max) / resolution + 1e-9));
  int levels = 0;
  while ((fine_max >> (levels + 1)) >= 8) ++levels;

  std::vector<long long> best_idx;
  double best_obj = kInf;
  std::vector<Cut> cuts;
  long long evaluations = 0;
  for (int m = levels; m >= 0; --m) {
    const long long scale = 1LL << m;
    LatticeSearch search(data, model, resolution * static_cast<double>(scale));
    if (!best_idx.empty()) {
      std::vector<long long> coarse = best_idx;
      for (auto& v : coarse) v /= scale;
      search.seed(coarse, best_obj);
      Eigen::VectorXd x_hat(data.dimension());
      for (int j = 0; j < data.dimension(); ++j) {
        x_hat(j) = static_cast<double>(best_idx[static_cast<std::size_t>(j)]) * resolution;
      }
      search.add_cuts(x_hat);
    }
    search.add_cuts(cuts);
    search.run();
    cuts = search.cuts();
    evaluations += search.evaluations();
    if (!search.best_index().empty()) {
      best_idx = search.best_index();
      for (auto& v : best_idx) v *= scale;
      best_obj = search.best_objective();
    }
  }

  OracleReport r;
  r.resolution = resolution;
  r.evaluations = evaluations;
  r.x_best = Eigen::VectorXd::Zero(data.dimension());
  if (best_idx.empty()) {
    r.objective = kInf;
    return r;
  }
  for (int j = 0; j < data.dimension(); ++j) {
    r.x_best(j) = static_cast<double>(best_idx[static_cast<std::size_t>(j)]) * resolution;
  }
  r.feasible = true;
  r.objective = consumed_power(r.x_best, model, data).total;
  return r;
}

FeasibilityReport check_feasibility(const Eigen::VectorXd& x, const ProblemData& data,
                                    double tol) {
  FeasibilityReport rep;
  const int K = data.num_users;
  rep.margins.resize(K);
  rep.scales.resize(K);
  rep.all_ok = true;
  const double s2 = data.sigma_dl * data.sigma_dl;
  for (int k = 0; k < K; ++k) {
    rep.margins(k) = constraint_g(x, k, data);
    rep.scales(k) = std::sqrt(quadratic_form(x, k, data) + s2);
    const bool ok = rep.margins(k) <= tol * rep.scales(k);
    rep.user_ok.push_back(ok);
    rep.all_ok = rep.all_ok && ok;
  }
  const Eigen::VectorXd ptx = per_ap_transmit_power(x, data);
  const double cap = std::sqrt(data.p_max) * (1.0 + tol);
  for (Eigen::Index l = 0; l < ptx.size(); ++l) {
    const bool ok = std::sqrt(ptx(l)) <= cap;
    rep.ap_ok.push_back(ok);
    rep.all_ok = rep.all_ok && ok;
  }
  if ((x.array() < 0.0).any()) rep.all_ok = false;
  return rep;
}

MaxMinReport max_min_sinr(const ProblemData& data, const SolverOptions& options,
                          double bisection_tol) {
  if (!(bisection_tol > 0.0)) throw std::invalid_argument("max_min_sinr: tolerance must be > 0");
  MaxMinReport rep;
  rep.bisection_tol = bisection_tol;

  const double s2 = data.sigma_dl * data.sigma_dl;
  double gamma_ub = kInf;
  for (int k = 0; k < data.num_users; ++k) {
    const double gain = data.b.row(k).sum();
    gamma_ub = std::min(gamma_ub, data.p_max * gain * gain / s2);
  }
  if (!(gamma_ub > 0.0)) {
    rep.gamma = 0.0;
    rep.se = 0.0;
    return rep;
  }

  SolverOptions probe_opts = options;
  probe_opts.power_weight = 0.0;
  // 1 feasible, 0 infeasible, -1 inconclusive.
  auto probe = [&](double se) {
    ++rep.probes;
    const SolverResult r = penalty_minimize(with_common_target(data, se_to_sinr(se)), probe_opts);
    if (r.feasible) return 1;
    const bool capped = std::any_of(r.trace.begin(), r.trace.end(),
                                    [](const PenaltyIteration& it) { return it.apg_cap_hit; });
    return capped ? -1 : 0;
  };

  double lo = 0.0;
  double hi = sinr_to_se(gamma_ub);
  for (int widen = 0; widen < 8; ++widen) {
    const int v = probe(hi);
    if (v == 0) break;
    if (v < 0) {
      rep.conclusive = false;
      rep.se_lower = lo;
      rep.se_upper = hi;
      return rep;
    }
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > bisection_tol) {
    const double mid = 0.5 * (lo + hi);
    const int v = probe(mid);
    if (v < 0) {
      rep.conclusive = false;
      rep.se_lower = lo;
      rep.se_upper = hi;
      return rep;
    }
    (v == 1 ? lo : hi) = mid;
  }
  rep.se_lower = lo;
  rep.se_upper = hi;
  rep.se = lo;
  rep.gamma = se_to_sinr(lo);
  return rep;
}

nlohmann::json oracle_to_json(const OracleReport& r) {
  return nlohmann::json{{"x_best", std::vector<double>(r.x_best.begin(), r.x_best.end())},
                        {"objective", r.feasible ? nlohmann::json(r.objective) : nlohmann::json()},
                        {"feasible", r.feasible},
                        {"resolution", r.resolution},
                        {"evaluations", r.evaluations}};
}

}  // namespace cfpa
