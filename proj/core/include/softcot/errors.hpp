#pragma once

#include <stdexcept>
#include <string>

namespace softcot {

// Base for every library error so callers can catch the whole family at once.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define SOFTCOT_DEFINE_ERROR(NAME)                    \
    struct NAME : Error {                             \
        using Error::Error;                           \
    }

// tensor / graph
SOFTCOT_DEFINE_ERROR(ShapeMismatch);
SOFTCOT_DEFINE_ERROR(NonFiniteValue);
SOFTCOT_DEFINE_ERROR(GraphConsumed);
SOFTCOT_DEFINE_ERROR(NonDeterministicForward);

// transformer
SOFTCOT_DEFINE_ERROR(EmptyInput);
SOFTCOT_DEFINE_ERROR(SequenceTooLong);
SOFTCOT_DEFINE_ERROR(WidthMismatch);

// pipeline
SOFTCOT_DEFINE_ERROR(QuestionEmpty);
SOFTCOT_DEFINE_ERROR(LengthMismatch);
SOFTCOT_DEFINE_ERROR(ZeroThoughts);
SOFTCOT_DEFINE_ERROR(EmptyTargetSpan);

// training
SOFTCOT_DEFINE_ERROR(MissingGradient);
SOFTCOT_DEFINE_ERROR(EmptyDataset);
SOFTCOT_DEFINE_ERROR(FrozenViolation);
SOFTCOT_DEFINE_ERROR(CorruptCheckpoint);
SOFTCOT_DEFINE_ERROR(VersionMismatch);

// data
SOFTCOT_DEFINE_ERROR(MissingTemplate);
SOFTCOT_DEFINE_ERROR(MalformedLine);

// eval / config
SOFTCOT_DEFINE_ERROR(ConfigMismatch);
SOFTCOT_DEFINE_ERROR(ConfigError);

#undef SOFTCOT_DEFINE_ERROR

}  // namespace softcot
