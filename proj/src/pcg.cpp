#include "nearps/pcg.hpp"

#include <cmath>
#include <sstream>

#include "nearps/errors.hpp"

namespace nearps {

PcgResult pcg(const LinearOperator& apply, const Eigen::VectorXd& diagonal,
              const Eigen::VectorXd& b, const Eigen::VectorXd& x0, const PcgOptions& options,
              const std::function<void(const Eigen::VectorXd&)>& monitor) {
  const Eigen::Index n = b.size();
  if (diagonal.size() != n || x0.size() != n) throw DomainError("pcg: dimension mismatch");
  const int max_iter = options.max_iterations > 0 ? options.max_iterations
                                                  : static_cast<int>(10 * std::max<Eigen::Index>(n, 1));
  Eigen::VectorXd inv_diag(n);
  for (Eigen::Index i = 0; i < n; ++i) inv_diag[i] = diagonal[i] > 0.0 ? 1.0 / diagonal[i] : 1.0;

  PcgResult out;
  out.x = x0;
  if (monitor) monitor(out.x);
  const double b_norm = b.norm();
  if (b_norm == 0.0) {
    // Any x with A x = 0 solves the system; keep x0 when it already does.
    if (x0.isZero(0.0)) {
      out.converged = true;
      return out;
    }
  }
  const double scale = b_norm > 0.0 ? b_norm : 1.0;
  Eigen::VectorXd r = b - apply(out.x);
  out.relative_residual = r.norm() / scale;
  if (out.relative_residual <= options.relative_tolerance) {
    out.converged = true;
    return out;
  }
  Eigen::VectorXd z = inv_diag.cwiseProduct(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  for (int k = 1; k <= max_iter; ++k) {
    const Eigen::VectorXd ap = apply(p);
    const double pap = p.dot(ap);
    if (!std::isfinite(pap) || !std::isfinite(rz)) {
      std::ostringstream msg;
      msg << "pcg: non-finite values at iteration " << k;
      throw NumericError(msg.str());
    }
    if (pap <= 0.0) {
      if (pap == 0.0 && rz == 0.0) break;
      std::ostringstream msg;
      msg << "pcg: breakdown (p^T A p = " << pap << ") at iteration " << k;
      throw NumericError(msg.str());
    }
    const double alpha = rz / pap;
    out.x += alpha * p;
    r -= alpha * ap;
    out.iterations = k;
    if (monitor) monitor(out.x);
    out.relative_residual = r.norm() / scale;
    if (out.relative_residual <= options.relative_tolerance) {
      out.converged = true;
      break;
    }
    z = inv_diag.cwiseProduct(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  return out;
}

}  // namespace nearps
