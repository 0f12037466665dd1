#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"

#include "hexlens/render.hpp"

namespace hexlens {

using json = nlohmann::json;

/// Malformed or out-of-range render request.
class ParamsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Render state the service and CLI mutate through JSON documents.
struct ViewState {
    RenderParams params;
    LensState lens;
    bool operator==(const ViewState&) const = default;
};

/// Applies a (possibly partial) JSON document. Only keys present are changed;
/// unknown keys, wrong types and out-of-range values throw ParamsError and
/// leave `state` untouched. The document may be null or empty.
void apply_json(const json& doc, ViewState& state);

/// Full document with every field explicit, round-trips through apply_json.
json to_json(const ViewState& state);
json to_json(const TransferFunction& tf);
json to_json(const LensState& lens);
json to_json(const RenderStats& stats);

/// Throws ParamsError (with TransferFunctionError's message) when invalid.
TransferFunction transfer_function_from_json(const json& doc);

}  // namespace hexlens
