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

#include "riemce/geometry.h"

#include <cmath>
#include <sstream>

#include "riemce/errors.h"

namespace riemce::geometry {
namespace {

std::string Describe(const Eigen::VectorXd& point) {
  std::ostringstream out;
  out << "[" << point.transpose().format(Eigen::IOFormat(6, 0, ", ", ", ")) << "]";
  return out.str();
}

void RequireFinite(const Eigen::MatrixXd& m, const char* what, const Eigen::VectorXd& point) {
  if (!m.allFinite())
    throw NumericError(std::string("non-finite ") + what + " at " + Describe(point));
}

Eigen::LLT<Eigen::MatrixXd> Factor(const MetricTensor& metric) {
  Eigen::LLT<Eigen::MatrixXd> llt(metric.matrix);
  if (llt.info() != Eigen::Success)
    throw SingularMetricError("metric is not positive definite at " + Describe(metric.point));
  return llt;
}

}  // namespace

std::string MetricKindName(MetricKind kind) {
  switch (kind) {
    case MetricKind::kEuclidean: return "euclidean";
    case MetricKind::kPullback: return "pullback";
    case MetricKind::kEnhanced: return "enhanced";
  }
  return "unknown";
}

MetricTensor MakeMetric(const Eigen::VectorXd& point, Eigen::MatrixXd matrix, MetricKind kind) {
  if (matrix.rows() != matrix.cols()) throw ShapeError("metric must be square");
  RequireFinite(matrix, "metric", point);
  const Eigen::MatrixXd symmetric = 0.5 * (matrix + matrix.transpose());
  const auto identity = Eigen::MatrixXd::Identity(matrix.rows(), matrix.cols());
  for (double jitter : kJitterLadder) {
    Eigen::MatrixXd candidate = jitter == 0.0 ? symmetric : symmetric + jitter * identity;
    Eigen::LLT<Eigen::MatrixXd> llt(candidate);
    if (llt.info() == Eigen::Success && (llt.matrixLLT().diagonal().array() > 0).all())
      return {point, std::move(candidate), kind, jitter};
  }
  throw SingularMetricError("metric stays singular with jitter 1e-4 at " + Describe(point));
}

MetricTensor EuclideanMetric(const Eigen::VectorXd& point) {
  return {point, Eigen::MatrixXd::Identity(point.size(), point.size()), MetricKind::kEuclidean,
          0.0};
}

MetricTensor PullbackFromJacobians(const Eigen::VectorXd& z, const Eigen::MatrixXd& mean_jac,
                                   const Eigen::MatrixXd& sigma_jac) {
  RequireFinite(mean_jac, "decoder mean Jacobian", z);
  RequireFinite(sigma_jac, "decoder sigma Jacobian", z);
  Eigen::MatrixXd m = mean_jac.transpose() * mean_jac;
  m.noalias() += sigma_jac.transpose() * sigma_jac;
  return MakeMetric(z, std::move(m), MetricKind::kPullback);
}

MetricTensor EnhancedFromJacobians(const Eigen::VectorXd& z, const Eigen::MatrixXd& mean_jac,
                                   const Eigen::MatrixXd& sigma_jac,
                                   const Eigen::MatrixXd& representation_jac) {
  if (representation_jac.cols() != mean_jac.rows())
    throw ConfigError("classifier input dim " + std::to_string(representation_jac.cols()) +
                      " != decoder output dim " + std::to_string(mean_jac.rows()));
  RequireFinite(representation_jac, "representation Jacobian", z);
  const Eigen::MatrixXd mean_part = representation_jac * mean_jac;
  const Eigen::MatrixXd sigma_part = representation_jac * sigma_jac;
  MetricTensor metric = PullbackFromJacobians(z, mean_part, sigma_part);
  metric.kind = MetricKind::kEnhanced;
  return metric;
}

MetricTensor PullbackMetric(const models::VaeModel& vae, const Eigen::VectorXd& z) {
  return PullbackFromJacobians(z, vae.DecoderMeanJacobian(z), vae.DecoderSigmaJacobian(z));
}

AmbientMetric AmbientMetricAt(const models::ClassifierModel& clf, const Eigen::VectorXd& x) {
  const Eigen::MatrixXd jac = clf.RepresentationJacobian(x);
  RequireFinite(jac, "representation Jacobian", x);
  return {x, jac.transpose() * jac};
}

MetricTensor EnhancedMetric(const models::VaeModel& vae, const models::ClassifierModel& clf,
                            const Eigen::VectorXd& z) {
  if (clf.input_dim() != vae.ambient_dim())
    throw ConfigError("classifier input dim " + std::to_string(clf.input_dim()) +
                      " != VAE ambient dim " + std::to_string(vae.ambient_dim()));
  Eigen::VectorXd mean;
  const Eigen::MatrixXd mean_jac = vae.DecoderMeanJacobian(z, &mean);
  return EnhancedFromJacobians(z, mean_jac, vae.DecoderSigmaJacobian(z),
                               clf.RepresentationJacobian(mean));
}

Eigen::VectorXd RiemannianGradient(const MetricTensor& metric, const Eigen::VectorXd& gradient) {
  if (gradient.size() != metric.matrix.rows())
    throw ShapeError("gradient dim " + std::to_string(gradient.size()) + " != metric dim " +
                     std::to_string(metric.matrix.rows()));
  return Factor(metric).solve(gradient);
}

double MetricVolume(const MetricTensor& metric) {
  return Factor(metric).matrixLLT().diagonal().prod();
}

}  // namespace riemce::geometry
