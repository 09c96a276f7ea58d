#include "crpt/error.hpp"

namespace crpt {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::ZeroNorm: return "ZeroNorm";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFinite: return "NonFinite";
    case Errc::UnknownDomain: return "UnknownDomain";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::NotReset: return "NotReset";
    case Errc::CapacityExceeded: return "CapacityExceeded";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::IoError: return "IoError";
    case Errc::BadMagic: return "BadMagic";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::NonPositive: return "NonPositive";
    case Errc::Overflow: return "Overflow";
    case Errc::PadTooLarge: return "PadTooLarge";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::InsufficientNeighbors: return "InsufficientNeighbors";
    case Errc::TooFewPrototypes: return "TooFewPrototypes";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::DegenerateDenominator: return "DegenerateDenominator";
    case Errc::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

}  // namespace crpt
