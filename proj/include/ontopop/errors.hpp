#pragma once
// Error types thrown across the library. Every failure mode a caller can
// act on gets its own type; all derive from Error so CLI code can catch
// one base.

#include <stdexcept>
#include <string>

namespace ontopop {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define ONTOPOP_ERROR_TYPE(NAME)             \
  struct NAME : Error {                      \
    using Error::Error;                      \
  }

ONTOPOP_ERROR_TYPE(ParseError);
ONTOPOP_ERROR_TYPE(ValidationError);
ONTOPOP_ERROR_TYPE(UnknownLabel);
ONTOPOP_ERROR_TYPE(RuleCompileError);
ONTOPOP_ERROR_TYPE(EmptyRecords);
ONTOPOP_ERROR_TYPE(EmptyMention);
ONTOPOP_ERROR_TYPE(DimensionMismatch);
ONTOPOP_ERROR_TYPE(EmptyDataset);
ONTOPOP_ERROR_TYPE(LengthMismatch);
ONTOPOP_ERROR_TYPE(EmptySentence);
ONTOPOP_ERROR_TYPE(UnknownId);
ONTOPOP_ERROR_TYPE(MissingSentence);
ONTOPOP_ERROR_TYPE(EmptyTriples);
ONTOPOP_ERROR_TYPE(UnknownRelation);
ONTOPOP_ERROR_TYPE(ShapeMismatch);
ONTOPOP_ERROR_TYPE(UnknownNode);
ONTOPOP_ERROR_TYPE(InvalidType);
ONTOPOP_ERROR_TYPE(EmptySplit);
ONTOPOP_ERROR_TYPE(DegenerateLabels);
ONTOPOP_ERROR_TYPE(NotAPerson);
ONTOPOP_ERROR_TYPE(UnknownVocabulary);
ONTOPOP_ERROR_TYPE(MissingModel);
ONTOPOP_ERROR_TYPE(ConfigError);
ONTOPOP_ERROR_TYPE(IoError);

#undef ONTOPOP_ERROR_TYPE

}  // namespace ontopop
