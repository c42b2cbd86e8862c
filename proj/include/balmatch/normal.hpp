#pragma once

namespace balmatch {

double normal_cdf(double z);
/// Upper tail 1 - Phi(z), accurate for large z.
double normal_sf(double z);
double normal_quantile(double p);

}  // namespace balmatch
