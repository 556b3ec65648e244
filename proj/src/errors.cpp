#include "relq/errors.hpp"

namespace relq {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::usage: return "usage";
        case ErrorKind::parse: return "parse";
        case ErrorKind::validation: return "validation";
        case ErrorKind::refusal: return "refusal";
        case ErrorKind::numerical: return "numerical";
    }
    return "unknown";
}

}  // namespace relq
