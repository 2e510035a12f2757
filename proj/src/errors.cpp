#include "tsgmm/errors.hpp"

namespace tsgmm {

std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::DegenerateGeodesic: return "degenerate-geodesic";
    case ErrorKind::InvalidFrame: return "invalid-frame";
    case ErrorKind::NumericalDegeneracy: return "numerical-degeneracy";
    case ErrorKind::DegenerateComponent: return "degenerate-component";
    case ErrorKind::CorruptModel: return "corrupt-model";
    case ErrorKind::ConstraintCollision: return "constraint-collision";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

bool is_numerical(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::DegenerateGeodesic:
    case ErrorKind::NumericalDegeneracy:
    case ErrorKind::DegenerateComponent:
    case ErrorKind::Infeasible:
        return true;
    default:
        return false;
    }
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind)
{
}

void fail(ErrorKind kind, const std::string& message)
{
    throw Error(kind, message);
}

}  // namespace tsgmm
