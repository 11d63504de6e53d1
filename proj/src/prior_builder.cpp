#include "cpgeo/prior_builder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cpgeo/errors.hpp"

namespace cpgeo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// 8-neighbourhood in ring order starting north (y down): N NE E SE S SW W NW
constexpr int kDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr int kDy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};

class Bits {
public:
    explicit Bits(const Field2D& f) : nx_(f.nx()), ny_(f.ny()), b_(f.size()) {
        for (std::size_t k = 0; k < f.size(); ++k) b_[k] = f[k] != 0.0;
    }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    bool at(int x, int y) const {
        return x >= 0 && y >= 0 && x < nx_ && y < ny_ && b_[static_cast<std::size_t>(y) * nx_ + x];
    }
    void set(int x, int y, bool v) { b_[static_cast<std::size_t>(y) * nx_ + x] = v; }
    std::array<bool, 8> ring(int x, int y) const {
        std::array<bool, 8> r{};
        for (int i = 0; i < 8; ++i) r[i] = at(x + kDx[i], y + kDy[i]);
        return r;
    }
    Field2D to_field() const {
        Field2D f(nx_, ny_);
        for (std::size_t k = 0; k < b_.size(); ++k) f[k] = b_[k] ? 1.0 : 0.0;
        return f;
    }

private:
    int nx_, ny_;
    std::vector<char> b_;
};

void check_binary(const Field2D& seg) {
    if (seg.empty()) throw ValidationError("segmentation is empty");
    for (double v : seg.values()) {
        if (v != 0.0 && v != 1.0) throw ValidationError("segmentation must be binary (0 or 1)");
    }
}

// Guo-Hall deletion test; ring is N NE E SE S SW W NW = P2..P9.
bool guo_hall_deletable(const std::array<bool, 8>& r, int pass) {
    const bool p2 = r[0], p3 = r[1], p4 = r[2], p5 = r[3], p6 = r[4], p7 = r[5], p8 = r[6], p9 = r[7];
    const int c = (!p2 && (p3 || p4)) + (!p4 && (p5 || p6)) + (!p6 && (p7 || p8)) + (!p8 && (p9 || p2));
    const int n1 = (p9 || p2) + (p3 || p4) + (p5 || p6) + (p7 || p8);
    const int n2 = (p2 || p3) + (p4 || p5) + (p6 || p7) + (p8 || p9);
    const int n = std::min(n1, n2);
    const bool m = pass == 0 ? ((p6 || p7 || !p9) && p8) : ((p2 || p3 || !p5) && p4);
    return c == 1 && n >= 2 && n <= 3 && !m;
}

// Number of 8-connected groups formed by the set ring pixels.
int ring_groups(const std::array<bool, 8>& r) {
    std::array<int, 8> comp{};
    comp.fill(-1);
    int groups = 0;
    for (int s = 0; s < 8; ++s) {
        if (!r[s] || comp[s] >= 0) continue;
        std::vector<int> stack{s};
        comp[s] = groups;
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            for (int j = 0; j < 8; ++j) {
                if (!r[j] || comp[j] >= 0) continue;
                if (std::abs(kDx[i] - kDx[j]) <= 1 && std::abs(kDy[i] - kDy[j]) <= 1) {
                    comp[j] = groups;
                    stack.push_back(j);
                }
            }
        }
        ++groups;
    }
    return groups;
}

// Staircase corner: two perpendicular 4-neighbours, and the neighbours stay
// connected without the pixel.
bool staircase_corner(const std::array<bool, 8>& r) {
    int count = 0;
    for (bool b : r) count += b;
    if (count < 2) return false;
    const bool corner = (r[0] && r[2]) || (r[2] && r[4]) || (r[4] && r[6]) || (r[6] && r[0]);
    return corner && ring_groups(r) == 1;
}

double cross_angle_lerp(double a, double b, double t) { return wrap_angle(a + t * angle_diff(b, a)); }

struct Projection {
    double dist2 = std::numeric_limits<double>::infinity();
    std::size_t seg = 0;
    double t = 0.0;      // clamped
    double t_raw = 0.0;  // unclamped, for the end-cap test
};

std::size_t segment_count(const Centerline& c) { return c.closed ? c.size() : c.size() - 1; }

Projection project_segment(const Centerline& c, std::size_t i, double px, double py) {
    const Point2& a = c.samples[i];
    const Point2& b = c.samples[(i + 1) % c.size()];
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    Projection p;
    p.seg = i;
    p.t_raw = len2 > 0.0 ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0;
    p.t = std::clamp(p.t_raw, 0.0, 1.0);
    const double qx = a.x + p.t * dx - px, qy = a.y + p.t * dy - py;
    p.dist2 = qx * qx + qy * qy;
    return p;
}

Projection project(const Centerline& c, double px, double py) {
    Projection best;
    if (c.size() == 1) {
        best.dist2 = (c.samples[0].x - px) * (c.samples[0].x - px) + (c.samples[0].y - py) * (c.samples[0].y - py);
        return best;
    }
    for (std::size_t i = 0; i < segment_count(c); ++i) {
        const Projection p = project_segment(c, i, px, py);
        if (p.dist2 < best.dist2) best = p;
    }
    return best;
}

std::vector<Point2> moving_average(const std::vector<Point2>& pts, int w, bool closed) {
    const int n = static_cast<int>(pts.size());
    std::vector<Point2> out(pts.size());
    for (int i = 0; i < n; ++i) {
        const int h = closed ? std::min(w, (n - 1) / 2) : std::min({w, i, n - 1 - i});
        double sx = 0.0, sy = 0.0;
        for (int k = -h; k <= h; ++k) {
            const int j = closed ? ((i + k) % n + n) % n : i + k;
            sx += pts[static_cast<std::size_t>(j)].x;
            sy += pts[static_cast<std::size_t>(j)].y;
        }
        out[static_cast<std::size_t>(i)] = {sx / (2 * h + 1), sy / (2 * h + 1)};
    }
    return out;
}

std::vector<Point2> resample(const std::vector<Point2>& pts, bool closed) {
    const std::size_t n = pts.size();
    const std::size_t nseg = closed ? n : n - 1;
    std::vector<double> s(nseg + 1, 0.0);
    for (std::size_t i = 0; i < nseg; ++i) {
        const Point2& a = pts[i];
        const Point2& b = pts[(i + 1) % n];
        s[i + 1] = s[i] + std::hypot(b.x - a.x, b.y - a.y);
    }
    const double total = s.back();
    const long m = std::max(1L, std::lround(total));
    const double ds = total / static_cast<double>(m);
    const long count = closed ? m : m + 1;
    std::vector<Point2> out;
    out.reserve(static_cast<std::size_t>(count));
    std::size_t seg = 0;
    for (long k = 0; k < count; ++k) {
        const double target = std::min(k * ds, total);
        while (seg + 1 < nseg && s[seg + 1] < target) ++seg;
        const double len = s[seg + 1] - s[seg];
        const double t = len > 0.0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
        const Point2& a = pts[seg];
        const Point2& b = pts[(seg + 1) % n];
        out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
    return out;
}

}  // namespace

double Centerline::max_abs_curvature() const {
    double m = 0.0;
    for (double k : curvature) m = std::max(m, std::abs(k));
    return m;
}

int neighbour_count(const Field2D& img, int ix, int iy) {
    int c = 0;
    for (int i = 0; i < 8; ++i) {
        const int x = ix + kDx[i], y = iy + kDy[i];
        if (img.in_range(x, y) && img(x, y) != 0.0) ++c;
    }
    return c;
}

Field2D skeletonize(const Field2D& seg) {
    check_binary(seg);
    Bits b(seg);
    bool any = false;
    for (double v : seg.values()) any = any || v != 0.0;
    if (!any) throw ValidationError("segmentation has no foreground");

    std::vector<std::pair<int, int>> del;
    for (bool changed = true; changed;) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            del.clear();
            for (int y = 0; y < b.ny(); ++y) {
                for (int x = 0; x < b.nx(); ++x) {
                    if (b.at(x, y) && guo_hall_deletable(b.ring(x, y), pass)) del.emplace_back(x, y);
                }
            }
            for (auto [x, y] : del) b.set(x, y, false);
            changed = changed || !del.empty();
        }
    }
    // sequential so two corners of the same step are not both removed
    for (bool changed = true; changed;) {
        changed = false;
        for (int y = 0; y < b.ny(); ++y) {
            for (int x = 0; x < b.nx(); ++x) {
                if (b.at(x, y) && staircase_corner(b.ring(x, y))) {
                    b.set(x, y, false);
                    changed = true;
                }
            }
        }
    }
    return b.to_field();
}

bool chain_is_closed(const PixelChain& c) {
    if (c.size() < 4) return false;
    return std::abs(c.front()[0] - c.back()[0]) <= 1 && std::abs(c.front()[1] - c.back()[1]) <= 1;
}

std::vector<PixelChain> split_at_junctions(const Field2D& skeleton, int min_len) {
    check_binary(skeleton);
    Bits b(skeleton);
    const int nx = b.nx(), ny = b.ny();
    std::vector<std::pair<int, int>> junctions;
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            if (b.at(x, y) && neighbour_count(skeleton, x, y) >= 3) junctions.emplace_back(x, y);
        }
    }
    for (auto [x, y] : junctions) {
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (b.at(x + dx, y + dy)) b.set(x + dx, y + dy, false);
            }
        }
    }

    auto degree = [&](int x, int y) {
        int c = 0;
        for (int i = 0; i < 8; ++i) c += b.at(x + kDx[i], y + kDy[i]);
        return c;
    };
    std::vector<char> seen(static_cast<std::size_t>(nx) * ny, 0);
    auto visited = [&](int x, int y) -> char& { return seen[static_cast<std::size_t>(y) * nx + x]; };

    auto trace = [&](int x, int y) {
        PixelChain chain;
        int px = x, py = y;
        while (true) {
            chain.push_back({px, py});
            visited(px, py) = 1;
            int next = -1;
            // prefer 4-neighbours so diagonal shortcuts do not skip pixels
            for (int pass = 0; pass < 2 && next < 0; ++pass) {
                for (int i = pass; i < 8; i += 2) {
                    const int qx = px + kDx[i], qy = py + kDy[i];
                    if (b.at(qx, qy) && !visited(qx, qy)) {
                        next = i;
                        break;
                    }
                }
            }
            if (next < 0) break;
            px += kDx[next];
            py += kDy[next];
        }
        return chain;
    };

    std::vector<PixelChain> out;
    auto keep = [&](PixelChain c) {
        if (static_cast<int>(c.size()) >= min_len) out.push_back(std::move(c));
    };
    // open pieces from their ends first, then loops
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            if (b.at(x, y) && !visited(x, y) && degree(x, y) <= 1) keep(trace(x, y));
        }
    }
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            if (b.at(x, y) && !visited(x, y)) keep(trace(x, y));
        }
    }
    return out;
}

Centerline smooth_and_measure(const std::vector<Point2>& points, int window, bool closed) {
    if (window < 0) throw ValidationError("smoothing window must be nonnegative");
    if (static_cast<int>(points.size()) < std::max(window, 5)) {
        throw ValidationError("chain too short to smooth");
    }
    Centerline c;
    c.closed = closed;
    c.samples = resample(moving_average(points, window, closed), closed);
    const std::size_t n = c.size();
    if (n < (closed ? 4u : 2u)) throw ValidationError("chain too short after resampling");

    // segment directions, unwrapped
    const std::size_t nseg = closed ? n : n - 1;
    std::vector<double> alpha(nseg);
    for (std::size_t i = 0; i < nseg; ++i) {
        const Point2& a = c.samples[i];
        const Point2& b = c.samples[(i + 1) % n];
        alpha[i] = std::atan2(b.y - a.y, b.x - a.x);
        if (i > 0) alpha[i] = alpha[i - 1] + angle_diff(alpha[i], alpha[i - 1]);
    }
    // tangent per sample, unwrapped
    std::vector<double> eta(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (closed) {
            const std::size_t prev = (i + nseg - 1) % nseg;
            eta[i] = alpha[i] - 0.5 * angle_diff(alpha[i], alpha[prev]);
        } else if (i == 0) {
            eta[i] = alpha[0];
        } else if (i == n - 1) {
            eta[i] = alpha[nseg - 1];
        } else {
            eta[i] = 0.5 * (alpha[i - 1] + alpha[i]);
        }
    }
    std::vector<double> s(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        s[i] = s[i - 1] + std::hypot(c.samples[i].x - c.samples[i - 1].x, c.samples[i].y - c.samples[i - 1].y);
    }
    c.curvature.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (closed) {
            const std::size_t a = (i + n - 1) % n, b = (i + 1) % n;
            const double ds = std::hypot(c.samples[b].x - c.samples[i].x, c.samples[b].y - c.samples[i].y) +
                              std::hypot(c.samples[i].x - c.samples[a].x, c.samples[i].y - c.samples[a].y);
            c.curvature[i] = ds > 0.0 ? angle_diff(eta[b], eta[a]) / ds : 0.0;
        } else if (n == 2) {
            c.curvature[i] = 0.0;
        } else {
            const std::size_t a = i == 0 ? 0 : i - 1;
            const std::size_t b = i == n - 1 ? n - 1 : i + 1;
            c.curvature[i] = (eta[b] - eta[a]) / (s[b] - s[a]);
        }
    }
    c.tangent.resize(n);
    c.normal.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        c.tangent[i] = wrap_angle(eta[i]);
        c.normal[i] = {-std::sin(eta[i]), std::cos(eta[i])};
    }
    return c;
}

Centerline smooth_and_measure(const PixelChain& chain, int window) {
    std::vector<Point2> pts;
    pts.reserve(chain.size());
    for (const Pixel& p : chain) pts.push_back({static_cast<double>(p[0]), static_cast<double>(p[1])});
    return smooth_and_measure(pts, window, chain_is_closed(chain));
}

VoronoiMap voronoi_labels(const std::vector<Centerline>& centerlines, int width, int height) {
    if (centerlines.empty()) throw ValidationError("no centerlines for the Voronoi partition");
    if (width <= 0 || height <= 0) throw ValidationError("image dimensions must be positive");
    // bucket segments by cell; a segment lands in every cell its box covers
    constexpr int kCell = 8;
    const int cx_n = (width + kCell - 1) / kCell, cy_n = (height + kCell - 1) / kCell;
    struct Ref {
        std::uint32_t line;
        std::uint32_t seg;
    };
    std::vector<std::vector<Ref>> cells(static_cast<std::size_t>(cx_n) * cy_n);
    auto cell_of = [&](double v, int n) { return std::clamp(static_cast<int>(std::floor(v / kCell)), 0, n - 1); };
    for (std::size_t j = 0; j < centerlines.size(); ++j) {
        const Centerline& c = centerlines[j];
        if (c.size() == 0) throw ValidationError("centerline without samples");
        const std::size_t nseg = c.size() == 1 ? 1 : segment_count(c);
        for (std::size_t i = 0; i < nseg; ++i) {
            const Point2& a = c.samples[i];
            const Point2& b = c.samples[c.size() == 1 ? 0 : (i + 1) % c.size()];
            const int x0 = cell_of(std::min(a.x, b.x), cx_n), x1 = cell_of(std::max(a.x, b.x), cx_n);
            const int y0 = cell_of(std::min(a.y, b.y), cy_n), y1 = cell_of(std::max(a.y, b.y), cy_n);
            for (int cy = y0; cy <= y1; ++cy) {
                for (int cx = x0; cx <= x1; ++cx) {
                    cells[static_cast<std::size_t>(cy) * cx_n + cx].push_back(
                        {static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(i)});
                }
            }
        }
    }

    VoronoiMap out{Field2D(width, height, -1.0), Field2D(width, height, 0.0)};
    const int rmax = std::max(cx_n, cy_n);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const int pcx = x / kCell, pcy = y / kCell;
            double best = std::numeric_limits<double>::infinity();
            long best_j = -1;
            for (int r = 0; r <= rmax; ++r) {
                // every cell in ring r is at least (r - 1) cells away
                if (r >= 1 && best_j >= 0 && static_cast<double>(r - 1) * kCell > std::sqrt(best)) break;
                for (int cy = pcy - r; cy <= pcy + r; ++cy) {
                    if (cy < 0 || cy >= cy_n) continue;
                    for (int cx = pcx - r; cx <= pcx + r; ++cx) {
                        if (cx < 0 || cx >= cx_n) continue;
                        if (std::max(std::abs(cx - pcx), std::abs(cy - pcy)) != r) continue;
                        for (const Ref& ref : cells[static_cast<std::size_t>(cy) * cx_n + cx]) {
                            const Centerline& c = centerlines[ref.line];
                            const double d2 = c.size() == 1 ? project(c, x, y).dist2
                                                            : project_segment(c, ref.seg, x, y).dist2;
                            if (d2 < best || (d2 == best && static_cast<long>(ref.line) < best_j)) {
                                best = d2;
                                best_j = ref.line;
                            }
                        }
                    }
                }
            }
            out.label(x, y) = static_cast<double>(best_j);
            out.distance(x, y) = std::sqrt(best);
        }
    }
    return out;
}

double tube_width(const std::vector<Centerline>& centerlines, double u_max) {
    double kmax = 0.0;
    for (const Centerline& c : centerlines) kmax = std::max(kmax, c.max_abs_curvature());
    return kmax > 0.0 ? std::min(u_max, 0.9 / kmax) : u_max;
}

PriorMaps build_prior(const std::vector<Centerline>& centerlines, const VoronoiMap& voronoi, double u_max,
                      const LiftedGrid& grid) {
    if (!(u_max > 0.0)) throw ValidationError("u_max must be positive");
    const int w = grid.nx(), h = grid.ny();
    if (voronoi.label.nx() != w || voronoi.label.ny() != h) {
        throw ValidationError("image size does not match the lifted grid");
    }
    PriorMaps maps{Field2D(w, h, kNaN), Field2D(w, h, kNaN), Field2D(w, h, -1.0), ScalarField(grid, 0.0), 0.0, false, {}};
    maps.tube_width = tube_width(centerlines, u_max);
    // below half a pixel the tube holds no pixel centre off the polyline
    if (centerlines.empty() || maps.tube_width < 0.5) {
        maps.degenerate = true;
        maps.warning = centerlines.empty() ? "no centerlines; curvature prior is zero"
                                           : "centerlines too curved for a tube; curvature prior is zero";
        return maps;
    }
    const double U = maps.tube_width;
    const int nt = grid.n_theta();
    std::vector<double> cos_t(static_cast<std::size_t>(nt)), sin_t(static_cast<std::size_t>(nt));
    for (int k = 0; k < nt; ++k) {
        cos_t[static_cast<std::size_t>(k)] = std::cos(grid.theta_of(k));
        sin_t[static_cast<std::size_t>(k)] = std::sin(grid.theta_of(k));
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (voronoi.distance(x, y) > U) continue;
            const auto j = static_cast<std::size_t>(voronoi.label(x, y));
            const Centerline& c = centerlines.at(j);
            if (c.size() < 2) continue;
            const Projection p = project(c, x, y);
            if (!c.closed) {
                const bool before = p.seg == 0 && p.t_raw < -1e-9;
                const bool after = p.seg == segment_count(c) - 1 && p.t_raw > 1 + 1e-9;
                if ((before || after) && p.dist2 > 1e-18) continue;
            }
            const std::size_t a = p.seg, b = (p.seg + 1) % c.size();
            const double phi = (1 - p.t) * c.curvature[a] + p.t * c.curvature[b];
            const double vt = cross_angle_lerp(c.tangent[a], c.tangent[b], p.t);
            maps.phi(x, y) = phi;
            maps.vartheta(x, y) = vt;
            maps.region_label(x, y) = static_cast<double>(j);
            const double cv = std::cos(vt), sv = std::sin(vt);
            const double mag = phi / grid.h_x();
            const std::size_t base = grid.linear({x, y, 0});
            for (int k = 0; k < nt; ++k) {
                const double d = cos_t[static_cast<std::size_t>(k)] * cv + sin_t[static_cast<std::size_t>(k)] * sv;
                maps.omega[base + static_cast<std::size_t>(k)] = d >= 0.0 ? mag : -mag;
            }
        }
    }
    return maps;
}

PriorBuild build_prior_from_segmentation(const Field2D& seg, const LiftedGrid& grid, const PriorOptions& options) {
    if (seg.nx() != grid.nx() || seg.ny() != grid.ny()) {
        throw ValidationError("segmentation size does not match the lifted grid");
    }
    if (options.min_len < 2) throw ValidationError("min_len must be at least 2");
    Field2D skeleton = skeletonize(seg);
    std::vector<Centerline> centerlines;
    const int need = std::max({options.min_len, options.window, 5});
    for (const PixelChain& chain : split_at_junctions(skeleton, need)) {
        centerlines.push_back(smooth_and_measure(chain, options.window));
    }
    const VoronoiMap vor = centerlines.empty()
                               ? VoronoiMap{Field2D(seg.nx(), seg.ny(), -1.0), Field2D(seg.nx(), seg.ny(), kNaN)}
                               : voronoi_labels(centerlines, seg.nx(), seg.ny());
    PriorMaps maps = build_prior(centerlines, vor, options.u_max, grid);
    return {std::move(skeleton), std::move(centerlines), std::move(maps)};
}

}  // namespace cpgeo
