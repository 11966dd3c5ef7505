#include "nonzero/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nonzero/errors.hpp"

namespace nonzero {

namespace {

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

// Adds weight * psi(a) into grad.
void add_nhot(std::vector<double>& grad, const JointActionSpace& space, const JointAction& a,
              double weight) {
  for (int i = 0; i < space.agents(); ++i) {
    grad[nhot_position(space, i, a[static_cast<std::size_t>(i)])] += weight;
  }
}

struct Evaluated {
  double z;
  double eta;
  double slope;  // d eta / d z
};

Evaluated evaluate(const SurrogateParams& p, const JointAction& a) {
  const double z = score(p, a);
  return {z, link(z, p.c(), p.alpha()), link_derivative(z, p.c(), p.alpha())};
}

}  // namespace

SurrogateParams::SurrogateParams(JointActionSpace space, std::vector<double> theta, double c,
                                 double alpha)
    : space_(std::move(space)), theta_(std::move(theta)), c_(c), alpha_(alpha) {
  if (theta_.size() != space_.encoding_size()) {
    throw DimensionMismatch("theta has " + std::to_string(theta_.size()) + " entries, expected " +
                            std::to_string(space_.encoding_size()));
  }
  if (!(c_ > 0.0) || !(alpha_ > 0.0) || !std::isfinite(c_) || !std::isfinite(alpha_)) {
    throw InvalidArgument("link constants c and alpha must be positive and finite");
  }
  if (!all_finite(theta_)) throw NumericFailure("theta contains a non-finite entry");
}

SurrogateParams SurrogateParams::zeros(const JointActionSpace& space, double c, double alpha) {
  return SurrogateParams(space, std::vector<double>(space.encoding_size(), 0.0), c, alpha);
}

SurrogateParams SurrogateParams::with_theta(std::vector<double> theta) const {
  return SurrogateParams(space_, std::move(theta), c_, alpha_);
}

nlohmann::json to_json(const SurrogateParams& p) {
  return {{"theta", std::vector<double>(p.theta().begin(), p.theta().end())},
          {"c", p.c()},
          {"alpha", p.alpha()}};
}

SurrogateParams surrogate_from_json(const JointActionSpace& space, const nlohmann::json& j) {
  return SurrogateParams(space, j.at("theta").get<std::vector<double>>(), j.at("c").get<double>(),
                         j.at("alpha").get<double>());
}

double link(double z, double c, double alpha) {
  return c * std::asinh(alpha * z);
}

double link_derivative(double z, double c, double alpha) {
  const double az = alpha * z;
  // hypot avoids overflow of az*az for |az| > 1e154.
  return c * alpha / std::hypot(1.0, az);
}

double score(const SurrogateParams& p, std::span<const double> psi) {
  if (psi.size() != p.theta().size()) {
    throw DimensionMismatch("n-hot vector has " + std::to_string(psi.size()) +
                            " entries, expected " + std::to_string(p.theta().size()));
  }
  double z = 0.0;
  for (std::size_t k = 0; k < psi.size(); ++k) z += p.theta()[k] * psi[k];
  return z;
}

double score(const SurrogateParams& p, const JointAction& a) {
  const auto& space = p.space();
  space.validate(a);
  double z = 0.0;
  for (int i = 0; i < space.agents(); ++i) {
    z += p.theta()[nhot_position(space, i, a[static_cast<std::size_t>(i)])];
  }
  return z;
}

double eta(const SurrogateParams& p, const JointAction& a) {
  return link(score(p, a), p.c(), p.alpha());
}

double delta1(const SurrogateParams& p, const JointAction& a, const Direction& u) {
  return eta(p, apply_direction(a, u)) - eta(p, a);
}

double delta2(const SurrogateParams& p, const JointAction& a, const Direction& u,
              const Direction& v) {
  const JointAction auv = apply_pair(a, u, v);
  return eta(p, auv) - eta(p, apply_direction(a, u)) - eta(p, apply_direction(a, v)) + eta(p, a);
}

double decomposition_residual(const SurrogateParams& p, const JointAction& a, const Direction& u,
                              const Direction& v) {
  const double full = eta(p, apply_pair(a, u, v)) - eta(p, a);
  return full - (delta1(p, a, u) + delta1(p, a, v) + delta2(p, a, u, v));
}

std::array<double, 4> predict4(const SurrogateParams& p, const JointAction& a, const Direction& u,
                               const Direction& v) {
  const JointAction au = apply_direction(a, u);
  const JointAction av = apply_direction(a, v);
  const JointAction auv = apply_pair(a, u, v);
  const double e_a = eta(p, a);
  const double e_u = eta(p, au);
  return {e_a, e_u, e_u - e_a, eta(p, auv) - e_u - eta(p, av) + e_a};
}

SupervisionSample::SupervisionSample(JointAction a, Direction u, std::optional<Direction> v,
                                     std::array<double, 4> y)
    : a_(std::move(a)), u_(u), v_(v), y_(y) {
  if (!is_feasible(a_, u_)) throw InfeasibleDeviation("supervision direction u is infeasible");
  if (v_) {
    if (v_->agent == u_.agent) throw InvalidPair("supervision directions share an agent");
    if (!is_feasible(a_, *v_)) throw InfeasibleDeviation("supervision direction v is infeasible");
  }
  for (double t : y_) {
    if (!std::isfinite(t)) throw NumericFailure("supervision target is not finite");
  }
  const double scale = std::max({1.0, std::abs(y_[0]), std::abs(y_[1])});
  if (std::abs(y_[2] - (y_[1] - y_[0])) > 1e-9 * scale) {
    throw InvalidArgument("supervision target y[2] must equal y[1] - y[0]");
  }
}

SupervisionSample SupervisionSample::from_rewards(const JointAction& a, const Direction& u,
                                                  const std::optional<Direction>& v,
                                                  const RewardLookup& f) {
  const double r_a = f(a);
  const double r_u = f(apply_direction(a, u));
  double mixed = 0.0;
  if (v) {
    const double r_v = f(apply_direction(a, *v));
    const double r_uv = f(apply_pair(a, u, *v));
    mixed = r_uv - r_u - r_v + r_a;
  }
  return SupervisionSample(a, u, v, {r_a, r_u, r_u - r_a, mixed});
}

namespace {

struct SampleEval {
  Evaluated at_a;
  Evaluated at_u;
  std::optional<Evaluated> at_v;
  std::optional<Evaluated> at_uv;
  std::array<double, 4> residual;  // yhat - y
};

SampleEval evaluate_sample(const SurrogateParams& p, const SupervisionSample& s) {
  p.space().validate(s.a());
  SampleEval out{};
  out.at_a = evaluate(p, s.a());
  out.at_u = evaluate(p, apply_direction(s.a(), s.u()));
  std::array<double, 4> yhat{out.at_a.eta, out.at_u.eta, out.at_u.eta - out.at_a.eta, 0.0};
  if (s.v()) {
    out.at_v = evaluate(p, apply_direction(s.a(), *s.v()));
    out.at_uv = evaluate(p, apply_pair(s.a(), s.u(), *s.v()));
    yhat[3] = out.at_uv->eta - out.at_u.eta - out.at_v->eta + out.at_a.eta;
  }
  for (std::size_t k = 0; k < 4; ++k) out.residual[k] = yhat[k] - s.y()[k];
  if (!s.v()) out.residual[3] = 0.0;
  return out;
}

double squared_norm(const std::array<double, 4>& r) {
  return r[0] * r[0] + r[1] * r[1] + r[2] * r[2] + r[3] * r[3];
}

}  // namespace

double composite_error(const SurrogateParams& p, const SupervisionSample& sample) {
  return squared_norm(evaluate_sample(p, sample).residual);
}

double nonuct_loss(const SurrogateParams& p, std::span<const SupervisionSample> batch) {
  if (batch.empty()) throw EmptyBatch("loss of an empty batch");
  double total = 0.0;
  for (const auto& s : batch) total += 0.25 * composite_error(p, s);
  return total / static_cast<double>(batch.size());
}

std::vector<double> loss_gradient(const SurrogateParams& p,
                                  std::span<const SupervisionSample> batch) {
  if (batch.empty()) throw EmptyBatch("gradient of an empty batch");
  const auto& space = p.space();
  std::vector<double> grad(space.encoding_size(), 0.0);
  // d/dtheta of 1/4 * sum_k r_k^2 is 1/2 * sum_k r_k * d yhat_k.
  const double scale = 0.5 / static_cast<double>(batch.size());
  for (const auto& s : batch) {
    const SampleEval e = evaluate_sample(p, s);
    const auto& r = e.residual;
    // Coefficient of d eta(x) for each evaluation point x.
    double w_a = r[0] - r[2];
    double w_u = r[1] + r[2];
    if (s.v()) {
      w_a += r[3];
      w_u -= r[3];
      add_nhot(grad, space, apply_direction(s.a(), *s.v()), -scale * r[3] * e.at_v->slope);
      add_nhot(grad, space, apply_pair(s.a(), s.u(), *s.v()), scale * r[3] * e.at_uv->slope);
    }
    add_nhot(grad, space, s.a(), scale * w_a * e.at_a.slope);
    add_nhot(grad, space, apply_direction(s.a(), s.u()), scale * w_u * e.at_u.slope);
  }
  return grad;
}

SurrogateParams sgd_step(const SurrogateParams& p, std::span<const SupervisionSample> batch,
                         double learning_rate) {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning rate must be finite and non-negative");
  }
  const std::vector<double> grad = loss_gradient(p, batch);
  if (!all_finite(grad)) throw NumericFailure("surrogate gradient is not finite");
  std::vector<double> theta(p.theta().begin(), p.theta().end());
  for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= learning_rate * grad[k];
  if (!all_finite(theta)) throw NumericFailure("surrogate update produced a non-finite theta");
  return p.with_theta(std::move(theta));
}

double gain_loss(const SurrogateParams& p, const JointAction& base, const JointAction& candidate,
                 double target_gain) {
  const double r = eta(p, candidate) - eta(p, base) - target_gain;
  return 0.5 * r * r;
}

std::vector<double> gain_loss_gradient(const SurrogateParams& p, const JointAction& base,
                                       const JointAction& candidate, double target_gain) {
  const Evaluated eb = evaluate(p, base);
  const Evaluated ec = evaluate(p, candidate);
  const double r = ec.eta - eb.eta - target_gain;
  std::vector<double> grad(p.space().encoding_size(), 0.0);
  add_nhot(grad, p.space(), candidate, r * ec.slope);
  add_nhot(grad, p.space(), base, -r * eb.slope);
  return grad;
}

SurrogateParams fit_gain(const SurrogateParams& p, const JointAction& base,
                         const JointAction& candidate, double target_gain, double relaxation) {
  if (!std::isfinite(target_gain)) throw NumericFailure("target gain is not finite");
  if (!(relaxation > 0.0 && relaxation <= 2.0)) throw InvalidArgument("relaxation must lie in (0, 2]");
  const auto& space = p.space();
  space.validate(base);
  space.validate(candidate);
  std::vector<std::size_t> moved;
  for (int i = 0; i < space.agents(); ++i) {
    const int ci = candidate[static_cast<std::size_t>(i)];
    if (base[static_cast<std::size_t>(i)] != ci) moved.push_back(nhot_position(space, i, ci));
  }
  if (moved.empty()) return p;
  // Invert the link for the score that realises the target exactly.
  const double wanted = eta(p, base) + target_gain;
  const double z_target = std::sinh(wanted / p.c()) / p.alpha();
  if (!std::isfinite(z_target)) throw NumericFailure("target gain lies outside the link's range");
  const double shift = relaxation * (z_target - score(p, candidate)) /
                       static_cast<double>(moved.size());
  std::vector<double> theta(p.theta().begin(), p.theta().end());
  for (std::size_t k : moved) theta[k] += shift;
  if (!all_finite(theta)) throw NumericFailure("gain fit produced a non-finite theta");
  return p.with_theta(std::move(theta));
}

}  // namespace nonzero
