#include "flexwalk/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace flexwalk
{
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0,
                             const NelderMeadOptions& options)
{
    const int n = static_cast<int>(x0.size());
    const double alpha = 1.0;
    const double beta = 1.0 + 2.0 / n;
    const double gamma = 0.75 - 0.5 / n;
    const double delta = 1.0 - 1.0 / n;

    std::vector<Eigen::VectorXd> vertex(n + 1, x0);
    std::vector<double> value(n + 1);
    int evals = 0;

    for (int i = 0; i < n; i++)
    {
        double h = options.initial_step_rel * std::abs(x0(i));
        if (h < options.initial_step_abs * 1e-8)
        {
            h = options.initial_step_abs;
        }
        vertex[i + 1](i) += h;
    }
    for (int i = 0; i <= n; i++)
    {
        value[i] = f(vertex[i]);
        evals++;
    }

    auto sort_vertices = [&]() {
        std::vector<int> order(n + 1);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return value[a] < value[b]; });
        std::vector<Eigen::VectorXd> v2(n + 1);
        std::vector<double> f2(n + 1);
        for (int i = 0; i <= n; i++)
        {
            v2[i] = vertex[order[i]];
            f2[i] = value[order[i]];
        }
        vertex.swap(v2);
        value.swap(f2);
    };

    auto diameter = [&]() {
        double d = 0.0;
        for (int i = 1; i <= n; i++)
        {
            d = std::max(d, (vertex[i] - vertex[0]).lpNorm<Eigen::Infinity>());
        }
        return d;
    };

    NelderMeadResult result;
    sort_vertices();
    while (evals < options.max_evaluations)
    {
        if (diameter() < options.simplex_tolerance)
        {
            result.converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; i++)
        {
            centroid += vertex[i];
        }
        centroid /= n;

        const Eigen::VectorXd reflected = centroid + alpha * (centroid - vertex[n]);
        const double f_reflected = f(reflected);
        evals++;

        if (f_reflected < value[0])
        {
            const Eigen::VectorXd expanded = centroid + beta * (reflected - centroid);
            const double f_expanded = f(expanded);
            evals++;
            if (f_expanded < f_reflected)
            {
                vertex[n] = expanded;
                value[n] = f_expanded;
            }
            else
            {
                vertex[n] = reflected;
                value[n] = f_reflected;
            }
        }
        else if (f_reflected < value[n - 1])
        {
            vertex[n] = reflected;
            value[n] = f_reflected;
        }
        else
        {
            bool shrink = false;
            if (f_reflected < value[n])
            {
                // Outside contraction.
                const Eigen::VectorXd contracted = centroid + gamma * (reflected - centroid);
                const double f_contracted = f(contracted);
                evals++;
                if (f_contracted <= f_reflected)
                {
                    vertex[n] = contracted;
                    value[n] = f_contracted;
                }
                else
                {
                    shrink = true;
                }
            }
            else
            {
                // Inside contraction.
                const Eigen::VectorXd contracted = centroid + gamma * (vertex[n] - centroid);
                const double f_contracted = f(contracted);
                evals++;
                if (f_contracted < value[n])
                {
                    vertex[n] = contracted;
                    value[n] = f_contracted;
                }
                else
                {
                    shrink = true;
                }
            }
            if (shrink)
            {
                for (int i = 1; i <= n && evals < options.max_evaluations; i++)
                {
                    vertex[i] = vertex[0] + delta * (vertex[i] - vertex[0]);
                    value[i] = f(vertex[i]);
                    evals++;
                }
            }
        }
        sort_vertices();
    }

    result.x = vertex[0];
    result.value = value[0];
    result.evaluations = evals;
    return result;
}

}  // namespace flexwalk
