#pragma once

#include <memory>

#include "backends.hpp"
#include "remote_backend.hpp"

namespace sentifuse {

inline std::unique_ptr<Backend> make_backend(const BackendProfile& profile) {
    switch (profile.kind) {
        case BackendKind::scripted:
            return std::make_unique<ScriptedBackend>(profile, ScriptedBackend::load_table(profile.fixture, profile.backend_id));
        case BackendKind::noise_sim:
            return std::make_unique<NoiseSimBackend>(profile);
        case BackendKind::remote_http:
            return std::make_unique<RemoteHttpBackend>(profile);
    }
    throw BackendError(profile.backend_id, "unsupported backend kind");
}

}  // namespace sentifuse
