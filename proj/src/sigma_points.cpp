#include "utvi/sigma_points.hpp"

namespace utvi {

SigmaPointSet make_sigma_points(double mu, double sigma2, double kappa) {
    if (!(kappa > 0.0)) throw ParamError("make_sigma_points: kappa must be > 0");
    if (!(sigma2 >= 0.0)) throw DomainError("make_sigma_points: sigma2 must be >= 0");
    SigmaPointSet s;
    s.kappa = kappa;
    double pts[3];
    double w[3];
    sigma_points3<double>(mu, sigma2, kappa, pts, w);
    s.points = {pts[0], pts[1], pts[2]};
    s.weights = {w[0], w[1], w[2]};
    return s;
}

}  // namespace utvi
