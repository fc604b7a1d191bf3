#pragma once

#include <stdexcept>
#include <string>

namespace retag {

// Every failure the engine can raise. Grouped into families so the CLI can
// map them onto stable process exit codes.
enum class Errc {
  // vector / dimension
  DimensionMismatch,
  ZeroVector,
  NonFiniteEntry,
  InvalidK,
  // taxonomy / index
  DuplicateLabel,
  UnknownLabel,
  MissingEmbedding,
  EmptyIndex,
  EmptyTaxonomy,
  InvalidLabel,
  EmptyDescription,
  // corpus / evaluation
  DuplicateDocId,
  GoldOutsideTaxonomy,
  EmptyValidationSet,
  NoGoldLabels,
  SizeTooLarge,
  EmptyCorpus,
  MissingGold,
  UnknownDoc,
  LabelOutsideTaxonomy,
  EmptyPredictions,
  InvalidSplit,
  NonPositiveParam,
  // files / formats
  MalformedLine,
  CorruptHeader,
  CountMismatch,
  IoError,
  // embedding gateway
  ServiceUnreachable,
  MalformedResponse,
  EmptyText,
  VectorNotFound,
};

enum class ErrorFamily : int {
  Io = 3,
  Format = 4,
  Validation = 5,
  Dimension = 6,
  Service = 7,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::NonFiniteEntry: return "NonFiniteEntry";
    case Errc::InvalidK: return "InvalidK";
    case Errc::DuplicateLabel: return "DuplicateLabel";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::MissingEmbedding: return "MissingEmbedding";
    case Errc::EmptyIndex: return "EmptyIndex";
    case Errc::EmptyTaxonomy: return "EmptyTaxonomy";
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::EmptyDescription: return "EmptyDescription";
    case Errc::DuplicateDocId: return "DuplicateDocId";
    case Errc::GoldOutsideTaxonomy: return "GoldOutsideTaxonomy";
    case Errc::EmptyValidationSet: return "EmptyValidationSet";
    case Errc::NoGoldLabels: return "NoGoldLabels";
    case Errc::SizeTooLarge: return "SizeTooLarge";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::MissingGold: return "MissingGold";
    case Errc::UnknownDoc: return "UnknownDoc";
    case Errc::LabelOutsideTaxonomy: return "LabelOutsideTaxonomy";
    case Errc::EmptyPredictions: return "EmptyPredictions";
    case Errc::InvalidSplit: return "InvalidSplit";
    case Errc::NonPositiveParam: return "NonPositiveParam";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::CorruptHeader: return "CorruptHeader";
    case Errc::CountMismatch: return "CountMismatch";
    case Errc::IoError: return "IoError";
    case Errc::ServiceUnreachable: return "ServiceUnreachable";
    case Errc::MalformedResponse: return "MalformedResponse";
    case Errc::EmptyText: return "EmptyText";
    case Errc::VectorNotFound: return "VectorNotFound";
  }
  return "Unknown";
}

inline ErrorFamily errc_family(Errc c) {
  switch (c) {
    case Errc::DimensionMismatch:
    case Errc::ZeroVector:
    case Errc::NonFiniteEntry:
      return ErrorFamily::Dimension;
    case Errc::MalformedLine:
    case Errc::CorruptHeader:
    case Errc::CountMismatch:
    case Errc::MalformedResponse:
      return ErrorFamily::Format;
    case Errc::IoError:
      return ErrorFamily::Io;
    case Errc::ServiceUnreachable:
    case Errc::VectorNotFound:
      return ErrorFamily::Service;
    default:
      return ErrorFamily::Validation;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const { return code_; }
  ErrorFamily family() const { return errc_family(code_); }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace retag
