#include "flexwalk/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "flexwalk/errors.hpp"

namespace flexwalk
{
namespace
{
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

double distance(double a, double b)
{
    const double fa = std::abs(a);
    const double fb = std::abs(b);
    if (fa > fb)
    {
        const double t = fb / fa;
        return fa * std::sqrt(1.0 + t * t);
    }
    if (fb > fa)
    {
        const double t = fa / fb;
        return fb * std::sqrt(1.0 + t * t);
    }
    return fa * std::sqrt(2.0);
}

void compute_d(Eigen::VectorXd& d, const Eigen::MatrixXd& J, const Eigen::VectorXd& np)
{
    d.noalias() = J.transpose() * np;
}

void update_z(Eigen::VectorXd& z, const Eigen::MatrixXd& J, const Eigen::VectorXd& d, int iq)
{
    const int n = static_cast<int>(J.rows());
    z.noalias() = J.rightCols(n - iq) * d.tail(n - iq);
}

void update_r(const Eigen::MatrixXd& R, Eigen::VectorXd& r, const Eigen::VectorXd& d, int iq)
{
    r.head(iq) =
        R.topLeftCorner(iq, iq).triangularView<Eigen::Upper>().solve(d.head(iq));
}

bool add_constraint(Eigen::MatrixXd& R, Eigen::MatrixXd& J, Eigen::VectorXd& d, int& iq,
                    double& R_norm)
{
    const int n = static_cast<int>(J.rows());
    // Zero the components of d below iq with Givens rotations, accumulating
    // the rotations into J so that J stays an orthogonal basis transform.
    for (int j = n - 1; j >= iq + 1; j--)
    {
        double cc = d(j - 1);
        double ss = d(j);
        const double h = distance(cc, ss);
        if (h == 0.0)
        {
            continue;
        }
        d(j) = 0.0;
        ss = ss / h;
        cc = cc / h;
        if (cc < 0.0)
        {
            cc = -cc;
            ss = -ss;
            d(j - 1) = -h;
        }
        else
        {
            d(j - 1) = h;
        }
        const double xny = ss / (1.0 + cc);
        for (int k = 0; k < n; k++)
        {
            const double t1 = J(k, j - 1);
            const double t2 = J(k, j);
            J(k, j - 1) = t1 * cc + t2 * ss;
            J(k, j) = xny * (t1 + J(k, j - 1)) - t2;
        }
    }
    iq++;
    R.col(iq - 1).head(iq) = d.head(iq);
    if (std::abs(d(iq - 1)) <= kEps * R_norm)
    {
        // The new constraint is linearly dependent on the active ones.
        return false;
    }
    R_norm = std::max(R_norm, std::abs(d(iq - 1)));
    return true;
}

void delete_constraint(Eigen::MatrixXd& R, Eigen::MatrixXd& J, Eigen::VectorXi& A,
                       Eigen::VectorXd& u, int p, int& iq, int l)
{
    const int n = static_cast<int>(J.rows());
    int qq = -1;
    for (int i = p; i < iq; i++)
    {
        if (A(i) == l)
        {
            qq = i;
            break;
        }
    }
    for (int i = qq; i < iq - 1; i++)
    {
        A(i) = A(i + 1);
        u(i) = u(i + 1);
        R.col(i) = R.col(i + 1);
    }
    A(iq - 1) = A(iq);
    u(iq - 1) = u(iq);
    A(iq) = 0;
    u(iq) = 0.0;
    for (int j = 0; j < iq; j++)
    {
        R(j, iq - 1) = 0.0;
    }
    iq--;
    if (iq == 0)
    {
        return;
    }
    for (int j = qq; j < iq; j++)
    {
        double cc = R(j, j);
        double ss = R(j + 1, j);
        const double h = distance(cc, ss);
        if (h == 0.0)
        {
            continue;
        }
        cc = cc / h;
        ss = ss / h;
        R(j + 1, j) = 0.0;
        if (cc < 0.0)
        {
            R(j, j) = -h;
            cc = -cc;
            ss = -ss;
        }
        else
        {
            R(j, j) = h;
        }
        const double xny = ss / (1.0 + cc);
        for (int k = j + 1; k < iq; k++)
        {
            const double t1 = R(j, k);
            const double t2 = R(j + 1, k);
            R(j, k) = t1 * cc + t2 * ss;
            R(j + 1, k) = xny * (t1 + R(j, k)) - t2;
        }
        for (int k = 0; k < n; k++)
        {
            const double t1 = J(k, j);
            const double t2 = J(k, j + 1);
            J(k, j) = t1 * cc + t2 * ss;
            J(k, j + 1) = xny * (J(k, j) + t1) - t2;
        }
    }
}

}  // namespace

double QpResult::kkt_residual() const
{
    return std::max({stationarity, primal_residual, complementarity});
}

QpResult solve_qp(const Eigen::MatrixXd& H,
                  const Eigen::VectorXd& g,
                  const Eigen::MatrixXd& A_eq,
                  const Eigen::VectorXd& b_eq,
                  const Eigen::MatrixXd& A_in,
                  const Eigen::VectorXd& b_in)
{
    const int n = static_cast<int>(H.rows());
    const int p = static_cast<int>(A_eq.rows());
    const int m = static_cast<int>(A_in.rows());
    if (H.cols() != n || g.size() != n || A_eq.cols() != (p > 0 ? n : A_eq.cols()) ||
        b_eq.size() != p || (m > 0 && A_in.cols() != n) || b_in.size() != m)
    {
        throw QpError("solve_qp: inconsistent dimensions");
    }

    // Goldfarb-Idnani convention: CE' x + ce0 = 0, CI' x + ci0 >= 0.
    const Eigen::MatrixXd CE = A_eq.transpose();
    const Eigen::VectorXd ce0 = -b_eq;
    const Eigen::MatrixXd CI = -A_in.transpose();
    const Eigen::VectorXd ci0 = b_in;

    Eigen::LLT<Eigen::MatrixXd> chol(H);
    if (chol.info() != Eigen::Success)
    {
        throw QpError("solve_qp: Hessian is not positive definite");
    }
    const double c1 = H.trace();
    Eigen::MatrixXd J = Eigen::MatrixXd::Identity(n, n);
    chol.matrixU().solveInPlace(J);  // J = L^{-T}
    const double c2 = J.trace();

    Eigen::VectorXd x = chol.solve(-g);
    double f_value = 0.5 * g.dot(x);

    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
    double R_norm = 1.0;

    const int max_active = p + m + 1;
    Eigen::VectorXi A_set = Eigen::VectorXi::Zero(max_active);
    Eigen::VectorXi A_old = Eigen::VectorXi::Zero(max_active);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(max_active);
    Eigen::VectorXd u_old = Eigen::VectorXd::Zero(max_active);
    Eigen::VectorXd x_old(n);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(max_active);
    Eigen::VectorXd np(n);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(m);
    std::vector<int> iai(m);
    std::vector<bool> iaexcl(m);

    int iq = 0;
    int iterations = 0;

    for (int i = 0; i < p; i++)
    {
        np = CE.col(i);
        compute_d(d, J, np);
        update_z(z, J, d, iq);
        update_r(R, r, d, iq);
        double t2 = 0.0;
        if (std::abs(z.dot(z)) > kEps)
        {
            t2 = (-np.dot(x) - ce0(i)) / z.dot(np);
        }
        x += t2 * z;
        u.head(iq) -= t2 * r.head(iq);
        u(iq) = t2;
        f_value += 0.5 * t2 * t2 * z.dot(np);
        A_set(i) = -i - 1;
        if (!add_constraint(R, J, d, iq, R_norm))
        {
            throw QpError("solve_qp: equality constraints are linearly dependent");
        }
    }

    for (int i = 0; i < m; i++)
    {
        iai[i] = i;
    }

    const int iter_limit = 100 * (n + p + m + 10);
    int ip = 0;

l1:
    iterations++;
    if (iterations > iter_limit)
    {
        throw QpError("solve_qp: iteration limit exceeded");
    }
    for (int i = p; i < iq; i++)
    {
        iai[A_set(i)] = -1;
    }
    {
        double psi = 0.0;
        for (int i = 0; i < m; i++)
        {
            iaexcl[i] = true;
            s(i) = CI.col(i).dot(x) + ci0(i);
            psi += std::min(0.0, s(i));
        }
        if (std::abs(psi) <= m * kEps * c1 * c2 * 100.0)
        {
            goto done;
        }
    }
    u_old.head(iq) = u.head(iq);
    A_old.head(iq) = A_set.head(iq);
    x_old = x;

l2:
    {
        double ss_val = 0.0;
        ip = 0;
        for (int i = 0; i < m; i++)
        {
            if (s(i) < ss_val && iai[i] != -1 && iaexcl[i])
            {
                ss_val = s(i);
                ip = i;
            }
        }
        if (ss_val >= 0.0)
        {
            goto done;
        }
    }
    np = CI.col(ip);
    u(iq) = 0.0;
    A_set(iq) = ip;

l2a:
    iterations++;
    if (iterations > iter_limit)
    {
        throw QpError("solve_qp: iteration limit exceeded");
    }
    compute_d(d, J, np);
    update_z(z, J, d, iq);
    update_r(R, r, d, iq);
    {
        double t1 = kInf;
        int l = 0;
        for (int k = p; k < iq; k++)
        {
            if (r(k) > 0.0)
            {
                if (u(k) / r(k) < t1)
                {
                    t1 = u(k) / r(k);
                    l = A_set(k);
                }
            }
        }
        double t2 = kInf;
        if (std::abs(z.dot(z)) > kEps)
        {
            t2 = -s(ip) / z.dot(np);
        }
        const double t = std::min(t1, t2);
        if (t >= kInf)
        {
            throw QpError("solve_qp: problem is infeasible (unbounded dual)");
        }
        if (t2 >= kInf)
        {
            // Dual-only step: drop the blocking constraint and retry.
            u.head(iq) -= t * r.head(iq);
            u(iq) += t;
            iai[l] = l;
            delete_constraint(R, J, A_set, u, p, iq, l);
            goto l2a;
        }
        x += t * z;
        f_value += t * z.dot(np) * (0.5 * t + u(iq));
        u.head(iq) -= t * r.head(iq);
        u(iq) += t;
        if (std::abs(t - t2) < kEps)
        {
            if (!add_constraint(R, J, d, iq, R_norm))
            {
                // Degenerate constraint: exclude it and restore the last state.
                iaexcl[ip] = false;
                delete_constraint(R, J, A_set, u, p, iq, ip);
                for (int i = 0; i < m; i++)
                {
                    iai[i] = i;
                }
                for (int i = 0; i < iq; i++)
                {
                    A_set(i) = A_old(i);
                    u(i) = u_old(i);
                    if (A_set(i) >= 0)
                    {
                        iai[A_set(i)] = -1;
                    }
                }
                x = x_old;
                goto l2;
            }
            iai[ip] = -1;
            goto l1;
        }
        // Partial step: drop the blocking constraint, stay on ip.
        iai[l] = l;
        delete_constraint(R, J, A_set, u, p, iq, l);
        s(ip) = CI.col(ip).dot(x) + ci0(ip);
        goto l2a;
    }

done:
    QpResult result;
    result.x = x;
    result.objective = f_value;
    result.iterations = iterations;
    result.eq_duals = Eigen::VectorXd::Zero(p);
    result.ineq_duals = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < iq; i++)
    {
        if (A_set(i) < 0)
        {
            result.eq_duals(-A_set(i) - 1) = -u(i);
        }
        else
        {
            result.ineq_duals(A_set(i)) = u(i);
        }
    }

    Eigen::VectorXd grad = H * x + g;
    if (p > 0)
    {
        grad += A_eq.transpose() * result.eq_duals;
    }
    if (m > 0)
    {
        grad += A_in.transpose() * result.ineq_duals;
    }
    result.stationarity = grad.size() > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;

    double primal = 0.0;
    if (p > 0)
    {
        primal = (A_eq * x - b_eq).cwiseAbs().maxCoeff();
    }
    double compl_res = 0.0;
    if (m > 0)
    {
        const Eigen::VectorXd slack = b_in - A_in * x;
        primal = std::max(primal, (-slack).maxCoeff());
        compl_res = (result.ineq_duals.array() * slack.array()).abs().maxCoeff();
    }
    result.primal_residual = std::max(primal, 0.0);
    result.complementarity = compl_res;
    return result;
}

}  // namespace flexwalk
