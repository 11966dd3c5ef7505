#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "nonzero/action_space.hpp"

namespace nonzero {

// Node-wise parameters of the asinh-GLM return surrogate
//
//   eta(theta, a) = c * asinh(alpha * z),   z = <theta, psi(a)>.
//
// The score map w(theta) is the identity, so z is the sum of the n theta
// entries selected by the n-hot encoding of a.
class SurrogateParams {
 public:
  SurrogateParams(JointActionSpace space, std::vector<double> theta, double c = 1.0,
                  double alpha = 1.0);

  static SurrogateParams zeros(const JointActionSpace& space, double c = 1.0, double alpha = 1.0);

  const JointActionSpace& space() const { return space_; }
  std::span<const double> theta() const { return theta_; }
  double c() const { return c_; }
  double alpha() const { return alpha_; }

  // Copy with a replaced parameter vector; link constants are kept.
  SurrogateParams with_theta(std::vector<double> theta) const;

 private:
  JointActionSpace space_;
  std::vector<double> theta_;
  double c_;
  double alpha_;
};

nlohmann::json to_json(const SurrogateParams& p);
SurrogateParams surrogate_from_json(const JointActionSpace& space, const nlohmann::json& j);

// g(z) = c asinh(alpha z) and its derivative.
double link(double z, double c, double alpha);
double link_derivative(double z, double c, double alpha);

// <theta, psi>; psi must have length n*d.
double score(const SurrogateParams& p, std::span<const double> psi);
// Same value without materialising psi.
double score(const SurrogateParams& p, const JointAction& a);

double eta(const SurrogateParams& p, const JointAction& a);

// eta(a^(u)) - eta(a)
double delta1(const SurrogateParams& p, const JointAction& a, const Direction& u);

// eta(a^(u,v)) - eta(a^(u)) - eta(a^(v)) + eta(a)
double delta2(const SurrogateParams& p, const JointAction& a, const Direction& u,
              const Direction& v);

// [eta(a^(u,v)) - eta(a)] - [delta1(u) + delta1(v) + delta2(u,v)]; zero up to rounding.
double decomposition_residual(const SurrogateParams& p, const JointAction& a, const Direction& u,
                              const Direction& v);

// [eta(a), eta(a^(u)), delta1(u), delta2(u,v)]
std::array<double, 4> predict4(const SurrogateParams& p, const JointAction& a, const Direction& u,
                               const Direction& v);

using RewardLookup = std::function<double(const JointAction&)>;

// One supervision point x = (a, u, v) with targets
// y = [f(a), f(a^(u)), f(a^(u)) - f(a), mixed difference of f].
// v is absent on single-agent spaces; the mixed component is then ignored.
class SupervisionSample {
 public:
  SupervisionSample(JointAction a, Direction u, std::optional<Direction> v,
                    std::array<double, 4> y);

  // Queries f at a, a^(u), a^(v), a^(u,v).
  static SupervisionSample from_rewards(const JointAction& a, const Direction& u,
                                        const std::optional<Direction>& v,
                                        const RewardLookup& f);

  const JointAction& a() const { return a_; }
  const Direction& u() const { return u_; }
  const std::optional<Direction>& v() const { return v_; }
  const std::array<double, 4>& y() const { return y_; }

 private:
  JointAction a_;
  Direction u_;
  std::optional<Direction> v_;
  std::array<double, 4> y_;
};

// Mean over the batch of 1/4 * sum_k (yhat_k - y_k)^2.
double nonuct_loss(const SurrogateParams& p, std::span<const SupervisionSample> batch);

// Unscaled squared error of one sample: 4x its loss.
double composite_error(const SurrogateParams& p, const SupervisionSample& sample);

// Exact gradient of nonuct_loss with respect to theta.
std::vector<double> loss_gradient(const SurrogateParams& p,
                                  std::span<const SupervisionSample> batch);

// theta <- theta - learning_rate * gradient. Throws NumericFailure on NaN/Inf.
SurrogateParams sgd_step(const SurrogateParams& p, std::span<const SupervisionSample> batch,
                         double learning_rate);

// Squared-error loss on a coordinated move base -> candidate:
// 1/2 * ((eta(candidate) - eta(base)) - target_gain)^2.
double gain_loss(const SurrogateParams& p, const JointAction& base, const JointAction& candidate,
                 double target_gain);

std::vector<double> gain_loss_gradient(const SurrogateParams& p, const JointAction& base,
                                       const JointAction& candidate, double target_gain);

// Moves the candidate's entries on the agents where it differs from base,
// by equal amounts, so that eta(candidate) - eta(base) approaches target_gain.
// relaxation = 1 hits the target exactly; eta(base) is unchanged. relaxation
// must lie in (0, 2].
SurrogateParams fit_gain(const SurrogateParams& p, const JointAction& base,
                         const JointAction& candidate, double target_gain,
                         double relaxation = 1.0);

}  // namespace nonzero
