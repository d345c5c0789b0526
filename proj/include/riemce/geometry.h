/*
 * Copyright 2026 The riemce Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef RIEMCE_GEOMETRY_H_
#define RIEMCE_GEOMETRY_H_

#include <string>

#include <Eigen/Dense>

#include "riemce/models.h"

namespace riemce::geometry {

enum class MetricKind { kEuclidean, kPullback, kEnhanced };

std::string MetricKindName(MetricKind kind);

// A symmetric positive definite latent metric at `point`. `jitter` is the
// multiple of the identity that was added to make the matrix factorizable.
struct MetricTensor {
  Eigen::VectorXd point;
  Eigen::MatrixXd matrix;
  MetricKind kind = MetricKind::kEuclidean;
  double jitter = 0.0;
};

// M_X(x) = J_h(x)^T J_h(x): positive semi-definite, D x D.
struct AmbientMetric {
  Eigen::VectorXd point;
  Eigen::MatrixXd matrix;
};

// Jitter ladder tried in order; the first value lets Cholesky succeed.
inline constexpr double kJitterLadder[] = {0.0,  1e-10, 1e-9, 1e-8, 1e-7,
                                           1e-6, 1e-5,  1e-4};

// Symmetrizes `matrix` and adds the smallest jitter from the ladder that makes
// it positive definite. Throws SingularMetricError if even 1e-4 fails and
// NumericError for non-finite input.
MetricTensor MakeMetric(const Eigen::VectorXd& point, Eigen::MatrixXd matrix,
                        MetricKind kind);

MetricTensor EuclideanMetric(const Eigen::VectorXd& point);

// M_Z = J_mu^T J_mu + J_sigma^T J_sigma from precomputed decoder Jacobians.
MetricTensor PullbackFromJacobians(const Eigen::VectorXd& z, const Eigen::MatrixXd& mean_jac,
                                   const Eigen::MatrixXd& sigma_jac);

// M^_Z = (J_h J_mu)^T (J_h J_mu) + (J_h J_sigma)^T (J_h J_sigma), which equals
// J_mu^T M_X J_mu + J_sigma^T M_X J_sigma with M_X evaluated at mu(z). With
// J_h = I this reduces to PullbackFromJacobians bit for bit.
MetricTensor EnhancedFromJacobians(const Eigen::VectorXd& z, const Eigen::MatrixXd& mean_jac,
                                   const Eigen::MatrixXd& sigma_jac,
                                   const Eigen::MatrixXd& representation_jac);

MetricTensor PullbackMetric(const models::VaeModel& vae, const Eigen::VectorXd& z);
AmbientMetric AmbientMetricAt(const models::ClassifierModel& clf, const Eigen::VectorXd& x);
// Throws ConfigError if the classifier input is not the VAE ambient space.
MetricTensor EnhancedMetric(const models::VaeModel& vae, const models::ClassifierModel& clf,
                            const Eigen::VectorXd& z);

// Solves M r = g by Cholesky.
Eigen::VectorXd RiemannianGradient(const MetricTensor& metric, const Eigen::VectorXd& gradient);

// sqrt(det M), from the Cholesky diagonal.
double MetricVolume(const MetricTensor& metric);

}  // namespace riemce::geometry

#endif  // RIEMCE_GEOMETRY_H_
