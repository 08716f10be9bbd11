#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stalkprobe {

enum class ErrorKind {
    InvalidArgument,
    InvalidRange,
    ExtensionOutOfRange,
    NoSensorLoaded,
    LeverStillHooked,
    SlotEmpty,
    GripperOccupied,
    MagazineEmpty,
    ZeroSlope,
    NoDetections,
    EmptyInput,
    Config,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidRange: return "InvalidRange";
    case ErrorKind::ExtensionOutOfRange: return "ExtensionOutOfRange";
    case ErrorKind::NoSensorLoaded: return "NoSensorLoaded";
    case ErrorKind::LeverStillHooked: return "LeverStillHooked";
    case ErrorKind::SlotEmpty: return "SlotEmpty";
    case ErrorKind::GripperOccupied: return "GripperOccupied";
    case ErrorKind::MagazineEmpty: return "MagazineEmpty";
    case ErrorKind::ZeroSlope: return "ZeroSlope";
    case ErrorKind::NoDetections: return "NoDetections";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::Config: return "Config";
    }
    return "Unknown";
}

/// Contract violation raised by library operations. Modeled outcomes
/// (missed grasps, failed calibrations, ...) are returned as values instead.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// Message without the kind prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
    if (!condition) throw Error(kind, what);
}

} // namespace stalkprobe
