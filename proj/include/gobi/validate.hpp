// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gobi/module.hpp"
#include <string>
#include <vector>

namespace gobi {

struct Diagnostic
{
    enum class Severity
    {
        error,
        warning,
    };

    Severity severity = Severity::error;
    std::string location;  // e.g. "func[2] instr 5", "export[0]"
    std::string message;
};

struct ValidationReport
{
    bool ok = true;
    std::vector<Diagnostic> diagnostics;

    /// All diagnostics joined, one per line: "location: message".
    std::string to_string() const;
    bool mentions(std::string_view text) const;
};

/// Type-checks every function body and checks all index references,
/// constant expressions and MVP structural limits.
ValidationReport validate(const ModuleIR& module);

}  // namespace gobi
