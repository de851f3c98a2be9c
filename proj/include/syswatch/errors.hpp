#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace syswatch {

// Exit-code buckets surfaced by the CLI: 2 usage/config, 3 data/compat,
// 4 numerical fault.
enum class ErrorCategory { Usage = 2, Data = 3, Numeric = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, std::string message)
        : std::runtime_error(std::move(message)), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

#define SYSWATCH_DEFINE_ERROR(Name, Category)                                  \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(std::string message)                                     \
            : Error(ErrorCategory::Category, std::move(message)) {}            \
    }

// Trace ingestion.
SYSWATCH_DEFINE_ERROR(MalformedLine, Data);
SYSWATCH_DEFINE_ERROR(IoError, Data);
SYSWATCH_DEFINE_ERROR(EmptyAfterFiltering, Data);
SYSWATCH_DEFINE_ERROR(UnknownClassDirectory, Data);

// Tokenizer.
SYSWATCH_DEFINE_ERROR(EmptyCorpus, Data);

// Model.
SYSWATCH_DEFINE_ERROR(InvalidPattern, Usage);
SYSWATCH_DEFINE_ERROR(InvalidConfig, Usage);
SYSWATCH_DEFINE_ERROR(NumericalFault, Numeric);
SYSWATCH_DEFINE_ERROR(VocabMismatch, Data);
SYSWATCH_DEFINE_ERROR(CheckpointError, Data);

// Trainer / decision.
SYSWATCH_DEFINE_ERROR(ClassMissing, Data);

// Metrics.
SYSWATCH_DEFINE_ERROR(LengthMismatch, Usage);
SYSWATCH_DEFINE_ERROR(LabelOutOfRange, Usage);
SYSWATCH_DEFINE_ERROR(EmptyCounts, Data);
SYSWATCH_DEFINE_ERROR(EmptyMatrix, Data);
SYSWATCH_DEFINE_ERROR(EmptyRow, Data);

// Decision.
SYSWATCH_DEFINE_ERROR(EmptyInput, Usage);
SYSWATCH_DEFINE_ERROR(WeightMismatch, Usage);

// Synthetic generator.
SYSWATCH_DEFINE_ERROR(InvalidSpec, Usage);

#undef SYSWATCH_DEFINE_ERROR

}  // namespace syswatch
