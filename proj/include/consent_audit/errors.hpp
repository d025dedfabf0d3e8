#pragma once

#include <stdexcept>
#include <string>

namespace consent_audit {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// DSL / document errors
struct SyntaxError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };

// Ingest
struct IngestError : Error { using Error::Error; };

// Datalog
struct SafetyError : Error { using Error::Error; };
struct StratificationError : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };

// Remote annotator
struct TransportError : Error { using Error::Error; };
struct ProtocolError : Error { using Error::Error; };
struct AuthError : Error { using Error::Error; };

// Misc
struct IoError : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };

}  // namespace consent_audit
