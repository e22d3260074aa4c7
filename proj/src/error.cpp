#include "microfarm/error.hpp"

namespace microfarm {

std::string_view error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return "config";
        case ErrorKind::validation: return "validation";
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::framing: return "framing";
        case ErrorKind::version: return "version";
        case ErrorKind::integrity: return "integrity";
        case ErrorKind::storage: return "storage";
        case ErrorKind::data: return "data";
        case ErrorKind::size: return "size";
        case ErrorKind::argument: return "argument";
        case ErrorKind::io: return "io";
        case ErrorKind::parse: return "parse";
    }
    return "unknown";
}

}  // namespace microfarm
