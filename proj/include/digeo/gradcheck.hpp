#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "digeo/mesh.hpp"

namespace digeo {

enum class DiffScheme { Ep, Gfd };

// Per-sample comparison of pulled-back gradients of |Exp_p(v) - q|^2 against
// the closed-form sphere gradients (the mesh is assumed to discretise the
// unit sphere; samples are projected onto it for the reference values).
struct GradCheckSample {
  double cos_v = 0, norm_ratio_v = 0;
  double cos_p = 0, norm_ratio_p = 0;
  double p_grad_norm = 0;  // EP: exactly zero by construction
  double len = 0;
};

struct GradCheckReport {
  DiffScheme scheme = DiffScheme::Gfd;
  std::vector<GradCheckSample> samples;
  double median_cos_v = 0, median_norm_ratio_v = 0;
  double median_cos_p = 0, median_norm_ratio_p = 0;
  double max_p_grad_norm = 0;
};

GradCheckReport run_gradcheck(const Mesh& sphere_mesh, DiffScheme scheme, int n,
                              std::uint64_t seed, double min_len, double max_len,
                              int workers = 0);

std::string gradcheck_to_json(const GradCheckReport& report);

double median(std::vector<double> values);  // ignores non-finite entries

}  // namespace digeo
