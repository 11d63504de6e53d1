#include "cpgeo/server.hpp"

#include <array>
#include <chrono>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <random>

#include "cpgeo/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cpgeo {

using nlohmann::json;

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    static const std::array<int, 256> table = [] {
        std::array<int, 256> t{};
        t.fill(-1);
        const std::string a = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
        for (std::size_t i = 0; i < a.size(); ++i) t[static_cast<unsigned char>(a[i])] = static_cast<int>(i);
        t['-'] = 62;  // url-safe alphabet too
        t['_'] = 63;
        return t;
    }();
    std::string s = text;
    // drop a data-URL prefix
    if (s.rfind("data:", 0) == 0) {
        const auto comma = s.find(',');
        if (comma == std::string::npos) throw ValidationError("malformed data URL");
        s = s.substr(comma + 1);
    }
    std::vector<std::uint8_t> out;
    out.reserve(s.size() * 3 / 4);
    std::uint32_t acc = 0;
    int bits = 0;
    bool padded = false;
    for (char ch : s) {
        if (ch == '=') {
            padded = true;
            continue;
        }
        if (ch == '\n' || ch == '\r' || ch == ' ' || ch == '\t') continue;
        const int v = table[static_cast<unsigned char>(ch)];
        if (v < 0 || padded) throw ValidationError("invalid base64 payload");
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xff));
        }
    }
    if (bits >= 6) throw ValidationError("truncated base64 payload");
    return out;
}

namespace {

struct NotFound : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct Conflict : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Session {
    std::mutex mutex;
    Field2D image;
    std::optional<Field2D> segmentation;
    TrackingConfig cfg;
    std::optional<ScalarField> score;
    std::optional<ScalarField> omega;
    std::vector<TrackResult> tracks;
};

const std::array<std::array<std::uint8_t, 3>, 4> kPalette{{{230, 40, 40}, {40, 120, 240}, {40, 200, 80}, {240, 180, 20}}};

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        json j = json::parse(req.body);
        if (!j.is_object()) throw ValidationError("request body must be a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("request body is not valid JSON: ") + e.what());
    }
}

Field2D decode_upload(const std::vector<std::uint8_t>& bytes) {
    try {
        return decode_image(bytes);
    } catch (const IoError& e) {
        throw ValidationError(e.what());
    }
}

void send_error(httplib::Response& res, int status, const std::string& type, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", {{"type", type}, {"message", message}}}}.dump(), "application/json");
}

}  // namespace

struct TrackingServer::Impl {
    TrackingConfig base;
    ServeOptions options;
    httplib::Server http;
    std::mutex sessions_mutex;
    std::map<std::string, std::shared_ptr<Session>> sessions;
    std::deque<std::string> order;
    std::mt19937_64 rng{std::random_device{}()};
    int bound_port = -1;

    std::string new_id() {
        std::uniform_int_distribution<std::uint64_t> d;
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(d(rng)));
        return buf;
    }

    std::shared_ptr<Session> find(const std::string& id) {
        std::lock_guard<std::mutex> lock(sessions_mutex);
        auto it = sessions.find(id);
        if (it == sessions.end()) throw NotFound("no session '" + id + "'");
        return it->second;
    }

    std::string add(std::shared_ptr<Session> s) {
        std::lock_guard<std::mutex> lock(sessions_mutex);
        std::string id = new_id();
        while (sessions.count(id)) id = new_id();
        sessions[id] = std::move(s);
        order.push_back(id);
        while (order.size() > options.max_sessions) {
            sessions.erase(order.front());
            order.pop_front();
        }
        return id;
    }

    template <typename F>
    httplib::Server::Handler guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const ValidationError& e) {
                send_error(res, 400, "validation", e.what());
            } catch (const NotFound& e) {
                send_error(res, 404, "not_found", e.what());
            } catch (const Conflict& e) {
                send_error(res, 409, "state", e.what());
            } catch (const SolverError& e) {
                send_error(res, 422, "solver", e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "internal", e.what());
            }
        };
    }

    void routes() {
        http.Post("/image", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = std::make_shared<Session>();
            s->cfg = base;
            const std::string type = req.get_header_value("Content-Type");
            if (type.find("application/json") != std::string::npos) {
                const json j = parse_body(req);
                for (const auto& [k, v] : j.items()) {
                    if (k != "image" && k != "segmentation") throw ValidationError("unknown key '" + k + "'");
                }
                if (!j.contains("image") || !j["image"].is_string()) throw ValidationError("missing base64 'image'");
                s->image = decode_upload(base64_decode(j["image"].get<std::string>()));
                if (j.contains("segmentation")) {
                    s->segmentation = decode_upload(base64_decode(j["segmentation"].get<std::string>()));
                }
            } else {
                if (req.body.empty()) throw ValidationError("empty upload");
                s->image = decode_upload(std::vector<std::uint8_t>(req.body.begin(), req.body.end()));
            }
            if (s->segmentation && (s->segmentation->nx() != s->image.nx() || s->segmentation->ny() != s->image.ny())) {
                throw ValidationError("segmentation and image sizes differ");
            }
            const int w = s->image.nx(), h = s->image.ny();
            const std::string id = add(std::move(s));
            res.status = 201;
            res.set_content(json{{"session", id}, {"width", w}, {"height", h}}.dump(), "application/json");
        }));

        http.Post(R"(/session/([0-9a-f]+)/cost)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = find(req.matches[1]);
            json j = parse_body(req);
            std::optional<Field2D> seg;
            if (j.contains("segmentation")) {
                seg = decode_upload(base64_decode(j["segmentation"].get<std::string>()));
                j.erase("segmentation");
            }
            std::lock_guard<std::mutex> lock(s->mutex);
            const TrackingConfig cfg = config_from_json(j.dump(), s->cfg);
            if (seg) {
                if (seg->nx() != s->image.nx() || seg->ny() != s->image.ny()) {
                    throw ValidationError("segmentation and image sizes differ");
                }
                s->segmentation = std::move(seg);
            }
            const auto t0 = std::chrono::steady_clock::now();
            ScalarField score = compute_score(s->image, cfg);
            json prior = nullptr;
            std::optional<ScalarField> omega;
            if (s->segmentation && cfg.prior_enabled) {
                PriorBuild pb = compute_prior(binarize(*s->segmentation), cfg);
                prior = {{"centerlines", pb.centerlines.size()},
                         {"tube_width", pb.maps.tube_width},
                         {"degenerate", pb.maps.degenerate},
                         {"warning", pb.maps.warning}};
                omega = std::move(pb.maps.omega);
            }
            s->cfg = cfg;
            s->score = std::move(score);
            s->omega = std::move(omega);
            s->tracks.clear();
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            res.set_content(json{{"n_theta", cfg.n_theta}, {"h_x", cfg.h_x()}, {"prior", prior}, {"seconds", secs}}.dump(),
                            "application/json");
        }));

        http.Post(R"(/session/([0-9a-f]+)/track)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = find(req.matches[1]);
            json j = parse_body(req);
            if (!j.contains("source") || !j.contains("target")) throw ValidationError("track needs source and target");
            json pair = json::array({{{"source", j["source"]}, {"target", j["target"]}}});
            j.erase("source");
            j.erase("target");
            for (const auto& [k, v] : j.items()) {
                if (k != "beta" && k != "alpha" && k != "prior_enabled" && k != "L" && k != "eps") {
                    throw ValidationError("unknown track key '" + k + "'");
                }
            }
            j["endpoints"] = pair;
            std::lock_guard<std::mutex> lock(s->mutex);
            if (!s->score) throw Conflict("build the cost first (POST /session/{id}/cost)");
            const TrackingConfig cfg = config_from_json(j.dump(), s->cfg);
            const ScalarField psi = cost_from_score(*s->score, cfg.alpha);
            const bool use_prior = cfg.prior_enabled && s->omega;
            const ScalarField omega = use_prior ? *s->omega : ScalarField(psi.grid(), 0.0);
            TrackResult r = track(cfg, psi, omega, cfg.endpoints.front());
            json out = json::parse(track_to_json(r, cfg, s->image.nx(), s->image.ny()));
            out["prior_used"] = use_prior;
            s->tracks.push_back(std::move(r));
            res.set_content(out.dump(), "application/json");
        }));

        http.Get(R"(/session/([0-9a-f]+)/overlay)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = find(req.matches[1]);
            std::lock_guard<std::mutex> lock(s->mutex);
            std::vector<OverlayPath> paths;
            for (std::size_t i = 0; i < s->tracks.size(); ++i) {
                paths.push_back({&s->tracks[i].path, kPalette[i % kPalette.size()]});
            }
            const auto png = encode_png(render_overlay(s->image, paths));
            res.set_content(std::string(png.begin(), png.end()), "image/png");
        }));

        if (!options.static_dir.empty() && !http.set_mount_point("/", options.static_dir)) {
            throw IoError("cannot serve static files from " + options.static_dir);
        }
    }
};

TrackingServer::TrackingServer(TrackingConfig base, ServeOptions options) : impl_(std::make_unique<Impl>()) {
    base.validate();
    if (options.port < 0 || options.port > 65535) throw ValidationError("port out of range");
    if (options.max_sessions == 0) throw ValidationError("max_sessions must be positive");
    impl_->base = std::move(base);
    impl_->options = std::move(options);
    impl_->routes();
}

TrackingServer::~TrackingServer() { stop(); }

int TrackingServer::bind() {
    if (impl_->bound_port >= 0) return impl_->bound_port;
    const auto& o = impl_->options;
    if (o.port == 0) {
        impl_->bound_port = impl_->http.bind_to_any_port(o.host);
    } else {
        impl_->bound_port = impl_->http.bind_to_port(o.host, o.port) ? o.port : -1;
    }
    if (impl_->bound_port < 0) throw IoError("cannot bind " + o.host + ":" + std::to_string(o.port));
    return impl_->bound_port;
}

void TrackingServer::run() {
    bind();
    if (!impl_->http.listen_after_bind()) throw IoError("server stopped with an error");
}

void TrackingServer::stop() { impl_->http.stop(); }

void TrackingServer::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace cpgeo
