#include "cpgeo/fmm_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "cpgeo/errors.hpp"

namespace cpgeo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-node stencils, arranged for the push-style update: for each angular
// slice the union of offsets used there, each stencil as sparse weights over
// that union, and for each slice of an accepted node the (offset, union
// index) pairs that may point back to it.
struct Scheme {
    struct Weight {
        std::uint32_t slot;
        double w;
    };
    struct Back {
        IVec3 e;
        std::uint32_t slot;
    };

    std::vector<std::vector<IVec3>> unions;
    std::vector<std::vector<Weight>> weights;
    std::vector<std::uint32_t> sid;
    std::vector<std::vector<Back>> back;

    double weight(std::uint32_t stencil, std::uint32_t slot) const {
        const auto& ws = weights[stencil];
        auto it = std::lower_bound(ws.begin(), ws.end(), slot,
                                   [](const Weight& a, std::uint32_t s) { return a.slot < s; });
        return (it != ws.end() && it->slot == slot) ? it->w : 0.0;
    }
};

void check_inputs(const LiftedGrid& grid, const ScalarField& psi, const ScalarField& omega,
                  double beta, const SolverOptions& options) {
    if (!(psi.grid() == grid)) throw ValidationError("cost field does not share the solver grid");
    if (!(omega.grid() == grid)) throw ValidationError("curvature prior does not share the solver grid");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be positive");
    if (options.L < 1) throw ValidationError("quadrature order L must be at least 1");
    if (!(options.eps > 0.0 && options.eps < 1.0)) throw ValidationError("relaxation eps must lie in (0, 1)");
    for (double v : psi.values()) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("cost psi must be positive and finite");
    }
    for (double v : omega.values()) {
        if (!std::isfinite(v)) throw ValidationError("curvature prior must be finite");
    }
}

void check_seeds(const LiftedGrid& grid, const SeedSet& seeds) {
    if (seeds.empty()) throw ValidationError("seed set is empty");
    for (const Seed& s : seeds) {
        if (!grid.in_range(s.index)) throw ValidationError("seed index out of range");
        if (!(s.value >= 0.0) || !std::isfinite(s.value)) {
            throw ValidationError("seed values must be finite and nonnegative");
        }
    }
}

Scheme build_scheme(const LiftedGrid& grid, const ScalarField& omega, double beta,
                    const SolverOptions& options, std::size_t& stencils_built) {
    const int nt = grid.n_theta();
    const std::size_t n = grid.size();
    Scheme sc;
    sc.sid.resize(n);

    // distinct omega buckets per slice
    std::vector<std::unordered_map<std::int64_t, std::uint32_t>> local(static_cast<std::size_t>(nt));
    std::vector<std::pair<int, std::int64_t>> keys;
    std::vector<std::uint32_t> slice_base;
    for (std::size_t k = 0; k < n; ++k) {
        const int t = static_cast<int>(k % nt);
        const std::int64_t b = StencilCache::bucket(omega[k]);
        auto& m = local[static_cast<std::size_t>(t)];
        auto it = m.find(b);
        if (it == m.end()) {
            it = m.emplace(b, static_cast<std::uint32_t>(keys.size())).first;
            keys.emplace_back(t, b);
        }
        sc.sid[k] = it->second;
    }

    StencilCache cache(grid, beta, options.L, options.eps);
    std::vector<const Stencil*> stencils(keys.size());
    const unsigned hw = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
    const std::size_t nthreads = keys.size() < 64 ? 1 : hw;
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t t = 0; t < nthreads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < keys.size(); i += nthreads) {
                    stencils[i] = &cache.get(keys[i].first,
                                             static_cast<double>(keys[i].second) * StencilCache::kOmegaBucket);
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                failure = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    stencils_built = keys.size();

    sc.unions.resize(static_cast<std::size_t>(nt));
    for (std::size_t i = 0; i < keys.size(); ++i) {
        auto& u = sc.unions[static_cast<std::size_t>(keys[i].first)];
        for (const WeightedOffset& w : stencils[i]->entries) u.push_back(w.offset);
    }
    for (auto& u : sc.unions) {
        std::sort(u.begin(), u.end());
        u.erase(std::unique(u.begin(), u.end()), u.end());
    }
    sc.weights.resize(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const auto& u = sc.unions[static_cast<std::size_t>(keys[i].first)];
        auto& ws = sc.weights[i];
        for (const WeightedOffset& w : stencils[i]->entries) {
            const auto slot = std::lower_bound(u.begin(), u.end(), w.offset) - u.begin();
            ws.push_back({static_cast<std::uint32_t>(slot), w.weight});
        }
        std::sort(ws.begin(), ws.end(), [](const auto& a, const auto& b) { return a.slot < b.slot; });
    }
    sc.back.resize(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) {
        const auto& u = sc.unions[static_cast<std::size_t>(t)];
        for (std::size_t j = 0; j < u.size(); ++j) {
            const int tx = grid.wrap_theta(t - u[j][2]);
            sc.back[static_cast<std::size_t>(tx)].push_back({u[j], static_cast<std::uint32_t>(j)});
        }
    }
    return sc;
}

// Indexed 4-ary min-heap on (value, sequence). A node sits in the heap at
// most once; lowering its value takes a fresh sequence number, so ties pop in
// FIFO order of the last decrease. The sequence number and the node index
// share one word (36 and 28 bits).
struct HeapItem {
    double value;
    std::uint64_t key;
};

constexpr int kNodeBits = 28;
constexpr std::uint64_t kNodeMask = (std::uint64_t{1} << kNodeBits) - 1;
constexpr std::uint32_t kNotQueued = 0xffffffffu;

class FrontHeap {
public:
    FrontHeap(std::size_t nodes, std::uint64_t& comparisons) : pos_(nodes, kNotQueued), cmp_(comparisons) {}

    bool empty() const { return a_.empty(); }

    // Inserts the node or lowers its key. Returns true on insertion.
    bool push_or_decrease(double value, std::uint64_t seq, std::size_t node) {
        const HeapItem x{value, (seq << kNodeBits) | node};
        std::uint32_t i = pos_[node];
        const bool inserted = i == kNotQueued;
        if (inserted) {
            i = static_cast<std::uint32_t>(a_.size());
            a_.push_back(x);
        }
        sift_up(i, x);
        return inserted;
    }

    HeapItem pop() {
        const HeapItem top = a_.front();
        pos_[node(top)] = kNotQueued;
        const HeapItem x = a_.back();
        a_.pop_back();
        if (!a_.empty()) sift_down(0, x);
        return top;
    }

    static std::size_t node(const HeapItem& h) { return static_cast<std::size_t>(h.key & kNodeMask); }

private:
    bool less(const HeapItem& a, const HeapItem& b) {
        ++cmp_;
        if (a.value != b.value) return a.value < b.value;
        return a.key < b.key;
    }

    void place(std::uint32_t i, const HeapItem& x) {
        a_[i] = x;
        pos_[node(x)] = i;
    }

    void sift_up(std::uint32_t i, const HeapItem& x) {
        while (i > 0) {
            const std::uint32_t p = (i - 1) / 4;
            if (!less(x, a_[p])) break;
            place(i, a_[p]);
            i = p;
        }
        place(i, x);
    }

    void sift_down(std::uint32_t i, const HeapItem& x) {
        const std::size_t n = a_.size();
        for (;;) {
            const std::size_t c0 = 4 * static_cast<std::size_t>(i) + 1;
            if (c0 >= n) break;
            std::size_t best = c0;
            const std::size_t end = std::min(c0 + 4, n);
            for (std::size_t c = c0 + 1; c < end; ++c) {
                if (less(a_[c], a_[best])) best = c;
            }
            if (!less(a_[best], x)) break;
            place(i, a_[best]);
            i = static_cast<std::uint32_t>(best);
        }
        place(i, x);
    }

    std::vector<HeapItem> a_;
    std::vector<std::uint32_t> pos_;
    std::uint64_t& cmp_;
};

double scaled_residual(double lhs, double rhs) { return std::abs(lhs - rhs) / std::max(1.0, rhs); }

double residual_at(const LiftedGrid& grid, const Scheme& sc, const std::vector<double>& u,
                   std::size_t k, double rhs) {
    const GridIndex x = grid.unravel(k);
    const auto& un = sc.unions[static_cast<std::size_t>(x.itheta)];
    double lhs = 0.0;
    for (const Scheme::Weight& w : sc.weights[sc.sid[k]]) {
        const auto nb = grid.shift(x, un[w.slot]);
        if (!nb) continue;
        const double d = u[k] - u[grid.linear(*nb)];
        if (d > 0.0) lhs += w.w * d * d;
    }
    return scaled_residual(lhs, rhs);
}

}  // namespace

double local_update(const Stencil& stencil, const std::vector<double>& neighbor_values, double rhs) {
    if (neighbor_values.size() != stencil.entries.size()) {
        throw ValidationError("neighbor values do not match the stencil");
    }
    if (!(rhs >= 0.0)) throw ValidationError("local update needs a nonnegative right-hand side");
    std::vector<std::pair<double, double>> nb;
    for (std::size_t k = 0; k < stencil.entries.size(); ++k) {
        if (std::isfinite(neighbor_values[k]) && stencil.entries[k].weight > 0.0) {
            nb.emplace_back(neighbor_values[k], stencil.entries[k].weight);
        }
    }
    if (nb.empty()) throw SolverError("local update without a finite neighbor");
    std::sort(nb.begin(), nb.end());
    const double ref = nb.front().first;
    double A = 0.0, B = 0.0, C = 0.0, u = kInf;
    for (std::size_t k = 0; k < nb.size(); ++k) {
        const double d = nb[k].first - ref;
        const double c = nb[k].second;
        A += c;
        B += c * d;
        C += c * d * d;
        const double disc = std::max(B * B - A * (C - rhs), 0.0);
        u = ref + (B + std::sqrt(disc)) / A;
        u = std::max(u, nb[k].first);
        if (k + 1 == nb.size() || u <= nb[k + 1].first) break;
    }
    return u;
}

SolveResult solve(const LiftedGrid& grid, const ScalarField& psi, const ScalarField& omega, double beta,
                  const SeedSet& seeds, const std::optional<std::vector<GridIndex>>& targets,
                  const SolverOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    check_inputs(grid, psi, omega, beta, options);
    check_seeds(grid, seeds);
    if (targets) {
        for (const GridIndex& t : *targets) {
            if (!grid.in_range(t)) throw ValidationError("target index out of range");
        }
    }

    SolveReport report;
    const Scheme sc = build_scheme(grid, omega, beta, options, report.counters.stencils_built);

    const std::size_t n = grid.size();
    // tentative value and the running sums of the active quadratic, relative to ref
    struct Node {
        double u = kInf;
        double ref = 0.0;
        double A = 0.0;
        double B = 0.0;
        double C = 0.0;
    };
    std::vector<Node> nodes(n);
    std::vector<std::uint8_t> state(n, 0);  // bit 0 accepted, bit 1 seed, bit 2 target
    for (const Seed& s : seeds) {
        const std::size_t k = grid.linear(s.index);
        nodes[k].u = std::min(nodes[k].u, s.value);
        state[k] |= 2;
    }
    if (targets) {
        for (const GridIndex& t : *targets) state[grid.linear(t)] |= 4;
    }

    SolveCounters& cnt = report.counters;
    if (n > kNodeMask) throw ValidationError("grid too large for the solver front");
    FrontHeap heap(n, cnt.heap_comparisons);
    std::uint64_t seq = 0;
    for (const Seed& s : seeds) {
        const std::size_t k = grid.linear(s.index);
        if (nodes[k].u == s.value) {
            if (heap.push_or_decrease(s.value, seq++, k)) ++cnt.heap_pushes;
            else ++cnt.heap_decreases;
        }
    }

    const int nx = grid.nx();
    const int ny = grid.ny();
    double last = -kInf;
    while (!heap.empty()) {
        const HeapItem top = heap.pop();
        ++cnt.heap_pops;
        const std::size_t k = FrontHeap::node(top);
        state[k] |= 1;
        ++report.accepted_count;
        const double vx = nodes[k].u;
        if (vx < last) ++cnt.monotonicity_violations;
        last = vx;
        const GridIndex x = grid.unravel(k);
        if (state[k] & 4) {
            report.reached_target = x;
            report.target_value = vx;
            break;
        }
        for (const Scheme::Back& b : sc.back[static_cast<std::size_t>(x.itheta)]) {
            const int ix = x.ix + b.e[0];
            const int iy = x.iy + b.e[1];
            if (ix < 0 || iy < 0 || ix >= nx || iy >= ny) continue;
            const std::size_t ky = grid.linear({ix, iy, grid.wrap_theta(x.itheta + b.e[2])});
            if (state[ky] & 3) continue;
            Node& y = nodes[ky];
            if (vx >= y.u) continue;
            const double c = sc.weight(sc.sid[ky], b.slot);
            if (c == 0.0) continue;
            ++cnt.local_updates;
            if (y.A == 0.0) y.ref = vx;
            const double d = vx - y.ref;
            y.A += c;
            y.B += c * d;
            y.C += c * d * d;
            const double rhs = 0.5 * psi[ky] * psi[ky];
            const double disc = std::max(y.B * y.B - y.A * (y.C - rhs), 0.0);
            const double unew = std::max(y.ref + (y.B + std::sqrt(disc)) / y.A, vx);
            if (unew < y.u) {
                y.u = unew;
                if (heap.push_or_decrease(unew, seq++, ky)) ++cnt.heap_pushes;
                else ++cnt.heap_decreases;
            }
        }
    }
    std::vector<double> u(n, kInf);
    for (std::size_t k = 0; k < n; ++k) {
        if (state[k] & 1) u[k] = nodes[k].u;
    }
    nodes.clear();
    nodes.shrink_to_fit();

    if (options.check_residual) {
        double worst = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if ((state[k] & 1) && !(state[k] & 2)) {
                worst = std::max(worst, residual_at(grid, sc, u, k, 0.5 * psi[k] * psi[k]));
            }
        }
        report.max_residual = worst;
    } else {
        report.max_residual = std::numeric_limits<double>::quiet_NaN();
    }
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {ScalarField(grid, std::move(u)), report};
}

SolveResult solve(const LiftedGrid& grid, const ScalarField& psi, double beta, const SeedSet& seeds,
                  const std::optional<std::vector<GridIndex>>& targets, const SolverOptions& options) {
    return solve(grid, psi, ScalarField(grid, 0.0), beta, seeds, targets, options);
}

BidirectionalResult solve_bidirectional(const LiftedGrid& grid, const ScalarField& psi,
                                        const ScalarField& omega, double beta, const LiftedPoint& s,
                                        const LiftedPoint& y, const SolverOptions& options) {
    const GridIndex s0 = grid.index_of(s);
    const GridIndex s1 = grid.index_of(LiftedPoint(s.x, s.y, s.theta + kPi));
    const GridIndex y0 = grid.index_of(y);
    const GridIndex y1 = grid.index_of(LiftedPoint(y.x, y.y, y.theta + kPi));
    SeedSet seeds{{s0, 0.0}};
    if (!(s1 == s0)) seeds.push_back({s1, 0.0});
    std::vector<GridIndex> targets{y0};
    if (!(y1 == y0)) targets.push_back(y1);

    SolveResult r = solve(grid, psi, omega, beta, seeds, targets, options);
    if (!r.report.reached_target) throw SolverError("unreachable target: no target node was accepted");
    return {std::move(r.distance), *r.report.reached_target, std::move(seeds), r.report};
}

double discrete_residual(const ScalarField& distance, const ScalarField& psi, const ScalarField& omega,
                         double beta, const SeedSet& seeds, const SolverOptions& options) {
    const LiftedGrid& grid = distance.grid();
    check_inputs(grid, psi, omega, beta, options);
    std::size_t built = 0;
    const Scheme sc = build_scheme(grid, omega, beta, options, built);
    std::vector<std::uint8_t> seed(grid.size(), 0);
    for (const Seed& s : seeds) seed[grid.linear(s.index)] = 1;
    double worst = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (seed[k] || !std::isfinite(distance[k])) continue;
        worst = std::max(worst, residual_at(grid, sc, distance.values(), k, 0.5 * psi[k] * psi[k]));
    }
    return worst;
}

std::string SolveReport::to_text() const {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "accepted_count " << accepted_count << '\n';
    if (reached_target) {
        out << "reached_target " << reached_target->ix << ' ' << reached_target->iy << ' '
            << reached_target->itheta << '\n';
        out << "target_value " << *target_value << '\n';
    } else {
        out << "reached_target none\n";
    }
    out << "wall_time " << wall_time << '\n';
    out << "max_residual " << max_residual << '\n';
    out << "heap_pushes " << counters.heap_pushes << '\n';
    out << "heap_pops " << counters.heap_pops << '\n';
    out << "heap_decreases " << counters.heap_decreases << '\n';
    out << "heap_comparisons " << counters.heap_comparisons << '\n';
    out << "local_updates " << counters.local_updates << '\n';
    out << "monotonicity_violations " << counters.monotonicity_violations << '\n';
    out << "stencils_built " << counters.stencils_built << '\n';
    return out.str();
}

}  // namespace cpgeo
