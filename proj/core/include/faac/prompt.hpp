#pragma once

namespace faac {

// Discrete stand-in for a text prompt: which sprite, on which background,
// doing which motion. Indices are validated against the model vocabularies
// at use sites.
struct PromptAttributes {
    int identity_id = 0;
    int background_id = 0;
    int motion_id = 0;

    bool operator==(const PromptAttributes&) const = default;
};

}  // namespace faac
