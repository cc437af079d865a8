#pragma once
// Shared setups for the unit tests. Everything is cached per process.

#include <map>
#include <memory>
#include <tuple>

#include "invman/manifold.hpp"
#include "invman/operator.hpp"

namespace testing {

using namespace invman;

struct Problem {
    std::shared_ptr<const DiscreteOperator> op;
    std::shared_ptr<const SpectrumData> spec;
    SpectralSplit split;
    std::shared_ptr<const ManifoldContext> ctx;
};

inline Problem make_problem(const Potential& pot, double L, int n, double lambda_star, const Nonlinearity& f,
                            const ManifoldOptions& mo = {}) {
    Problem p;
    p.op = std::make_shared<const DiscreteOperator>(assemble_operator(build_domain(L, n), pot));
    p.spec = std::make_shared<const SpectrumData>(compute_spectrum(*p.op));
    p.split = spectral_split(p.spec, lambda_star, 0.5);
    p.ctx = ManifoldContext::make(p.split, *p.op, f, mo);
    return p;
}

/** V = 3 - 2 sech^2 on [-20, 20], lambda* = 2, builtin f with scale c. */
inline const Problem& demo(int n = 201, double c = 0.07) {
    static std::map<std::pair<int, double>, Problem> cache;
    auto key = std::make_pair(n, c);
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, make_problem(poschl_teller(), 20, n, 2.0, c == 0 ? zero_nonlinearity() : tanh_sech(c)))
                 .first;
    return it->second;
}

/** Two bound states (3 and 6 below the threshold 7), split at the upper one so block 1 is populated.
 * n = 401 keeps the upper eigenvalue inside the default match tolerance. */
inline const Problem& two_state(const Nonlinearity& f = zero_nonlinearity()) {
    static std::map<std::string, Problem> cache;
    auto it = cache.find(f.name);
    if (it == cache.end()) it = cache.emplace(f.name, make_problem(poschl_teller(7, 6, 1), 20, 401, 6.0, f)).first;
    return it->second;
}

}  // namespace testing
