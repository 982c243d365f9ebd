#pragma once

#include <stdexcept>
#include <string>

namespace aniso {

/// Base class for every error raised by the library. `stage()` names the
/// pipeline step that failed so the CLI can map it to an exit code.
class Error : public std::runtime_error {
public:
    Error(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct InvalidCover : Error {
    explicit InvalidCover(const std::string& w) : Error("cover", w) {}
};

struct CoverDefect : Error {
    explicit CoverDefect(const std::string& w) : Error("cover-defect", w) {}
};

struct EstimationError : Error {
    explicit EstimationError(const std::string& w) : Error("estimation", w) {}
};

struct ContractError : Error {
    explicit ContractError(const std::string& w) : Error("contract", w) {}
};

struct SolverError : Error {
    explicit SolverError(const std::string& w) : Error("solver", w) {}
};

struct AdmissibilityError : Error {
    explicit AdmissibilityError(const std::string& w) : Error("admissibility", w) {}
};

struct NotAMolecule : Error {
    explicit NotAMolecule(const std::string& w) : Error("molecule", w) {}
};

struct DegenerateMolecule : Error {
    explicit DegenerateMolecule(const std::string& w) : Error("degenerate", w) {}
};

struct DecompositionDefect : Error {
    DecompositionDefect(const std::string& stage, const std::string& w)
        : Error("decompose/" + stage, w) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error("config", w) {}
};

}  // namespace aniso
