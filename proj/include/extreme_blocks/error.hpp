#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace extreme_blocks {

enum class ErrorKind {
    // graph
    UnknownNode,
    UnknownClique,
    SelfLoop,
    DuplicateEdge,
    Disconnected,
    NotBlockGraph,
    // model
    MissingEdgeParam,
    NonPositiveParam,
    NotCND,
    NotSymmetric,
    SingularBlock,
    // dist
    NotPD,
    DimensionMismatch,
    AllZeroWeights,
    NonPositiveCoordinate,
    SubsetTooSmall,
    NodeNotInClique,
    DifferentiationUnstable,
    // fit
    ConstantColumn,
    KOutOfRange,
    Underdetermined,
    InvalidSample,
    // latent
    NotIdentifiable,
    InconsistentInput,
    InvalidMask,
    // io
    ParseError,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::UnknownNode: return "UnknownNode";
    case ErrorKind::UnknownClique: return "UnknownClique";
    case ErrorKind::SelfLoop: return "SelfLoop";
    case ErrorKind::DuplicateEdge: return "DuplicateEdge";
    case ErrorKind::Disconnected: return "Disconnected";
    case ErrorKind::NotBlockGraph: return "NotBlockGraph";
    case ErrorKind::MissingEdgeParam: return "MissingEdgeParam";
    case ErrorKind::NonPositiveParam: return "NonPositiveParam";
    case ErrorKind::NotCND: return "NotCND";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::SingularBlock: return "SingularBlock";
    case ErrorKind::NotPD: return "NotPD";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::AllZeroWeights: return "AllZeroWeights";
    case ErrorKind::NonPositiveCoordinate: return "NonPositiveCoordinate";
    case ErrorKind::SubsetTooSmall: return "SubsetTooSmall";
    case ErrorKind::NodeNotInClique: return "NodeNotInClique";
    case ErrorKind::DifferentiationUnstable: return "DifferentiationUnstable";
    case ErrorKind::ConstantColumn: return "ConstantColumn";
    case ErrorKind::KOutOfRange: return "KOutOfRange";
    case ErrorKind::Underdetermined: return "Underdetermined";
    case ErrorKind::InvalidSample: return "InvalidSample";
    case ErrorKind::NotIdentifiable: return "NotIdentifiable";
    case ErrorKind::InconsistentInput: return "InconsistentInput";
    case ErrorKind::InvalidMask: return "InvalidMask";
    case ErrorKind::ParseError: return "ParseError";
    }
    return "Unknown";
}

/// Failure raised by every library operation. `kind()` is stable and
/// machine-readable; `what()` carries the human-readable detail.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace extreme_blocks
