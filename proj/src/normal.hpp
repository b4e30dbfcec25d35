#pragma once

namespace emcs {

double NormalPdf(double x);
double NormalCdf(double x);
// Upper tail 1 - Phi(x), accurate for large x.
double NormalSf(double x);
// Inverse of NormalCdf on (0, 1).
double NormalQuantile(double p);

}  // namespace emcs
