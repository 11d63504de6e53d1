#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cpgeo/pipeline.hpp"

namespace cpgeo {

struct ServeOptions {
    std::string host = "127.0.0.1";
    int port = 8080;            // 0 picks a free port
    std::string static_dir;     // served at / when set (the web UI)
    std::size_t max_sessions = 64;  // oldest session is dropped beyond this
};

// HTTP front end over the pipeline. Sessions hold an uploaded image, its
// orientation score and optional prior; each session has its own lock so
// track calls within it run one at a time while other sessions proceed.
//
//   POST /image                 raw PNG/PGM body, or JSON {"image": b64, "segmentation": b64?}
//   POST /session/{id}/cost     JSON config overrides, optional "segmentation": b64
//   POST /session/{id}/track    {"source": {x, y, theta?}, "target": {...}, beta?, alpha?, prior_enabled?}
//   GET  /session/{id}/overlay  PNG with every path tracked in the session
//
// Errors come back as {"error": {"type": ..., "message": ...}} with status
// 400 (validation), 404 (unknown session), 409 (cost not built yet) or 422
// (solver).
class TrackingServer {
public:
    TrackingServer(TrackingConfig base, ServeOptions options);
    ~TrackingServer();
    TrackingServer(const TrackingServer&) = delete;
    TrackingServer& operator=(const TrackingServer&) = delete;

    /// Binds the socket and returns the port. Throws IoError on failure.
    int bind();
    /// Serves until stop(); binds first when needed.
    void run();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace cpgeo
