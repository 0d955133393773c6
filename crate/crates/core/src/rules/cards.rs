use serde::Serialize;
use thiserror::Error;

use super::{RuleId, Severity};

/// Human-readable description of a rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleCard {
    pub id: &'static str,
    pub name: &'static str,
    pub cwe: &'static str,
    pub severity: Severity,
    pub condition: &'static str,
    pub remediation: &'static str,
    pub notes: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown rule `{id}`; valid rules: {}", RuleId::ALL.map(|r| r.as_str()).join(", "))]
pub struct UnknownRule {
    pub id: String,
}

pub fn card(rule: RuleId) -> RuleCard {
    let (condition, remediation, notes) = match rule {
        RuleId::InsecureConfigurationManagement => (
            "is_config_file(x) and is_sensitive_setting(x)",
            "Set the hardened value (for example `PermitRootLogin no`) and grant sudo rights per command instead of NOPASSWD:ALL.",
            "Default-setting checks are folded into the dangerous_settings lexicon.",
        ),
        RuleId::InsecureDependencyManagement => (
            "is_dependency(x) and (lacks_version_locking(x) or is_untrusted_source(x))",
            "Pin an exact version and install from a trusted registry over HTTPS, or pin git sources to a tag or commit.",
            "Either condition alone fires, so an unpinned package from the default repository is reported.",
        ),
        RuleId::InsecureInputHandling => (
            "is_user_input(x) and is_unsanitized(x) and x reaches a command or path in the same unit, when no more specific injection or path rule fired on x",
            "Validate the variable (assert, type filters such as `| int`) or quote it before use.",
            "Reported for inputs that reach a sink outside a shell-word position, such as shell arithmetic.",
        ),
        RuleId::OutdatedDependencies => (
            "is_dependency(x) and is_outdated_version(x.version) and has_known_vulnerabilities(x)",
            "Upgrade to a release at or above the advisory's fixed version.",
            "Needs a vulnerability record (advisory id) in the advisory database.",
        ),
        RuleId::PathTraversal => (
            "is_file_path(x) and is_user_input(x.value) and is_unsanitized(x.value), x not a command sink",
            "Restrict the variable to a basename (`| basename`) or validate it against an allowlist.",
            "",
        ),
        RuleId::CommandInjection => (
            "is_command_sink(x) = os-command and is_user_input(x) and is_unsanitized(x)",
            "Quote the variable (`| quote`, `shellescape`) or pass arguments as a list to a non-shell module.",
            "Fires only when an unsanitized interpolation sits in a shell-word position.",
        ),
        RuleId::CodeInjection => (
            "is_command_sink(x) = interpreter and is_user_input(x) and is_unsanitized(x)",
            "Never build code for eval, `python -c` or pipe lookups from variables; ship a reviewed script instead.",
            "Interpreter classification takes precedence over OS-command classification.",
        ),
        RuleId::OutdatedSoftwareVersion => (
            "is_dependency(x) and is_outdated_version(x.version) and no vulnerability record (end-of-life only)",
            "Move to a maintained release line, for example python3 instead of python2.7.",
            "Shares CWE-1104 with outdated-dependencies; a node gets at most one of the two.",
        ),
        RuleId::InadequateNamingConvention => (
            "named resource x and follows_nonstandard_convention(x.name)",
            "Use a descriptive name in one consistent style.",
            "Reasons: vague word, fewer than 3 characters, or mixed camelCase and snake_case.",
        ),
        RuleId::SensitiveInformationExposure => (
            "is_sensitive_data(x.name) and is_exposed(x)",
            "Reference a secret store (ansible-vault, sops, a secrets manager) and set no_log on tasks that handle secrets.",
            "Placeholders and secret-store references are not exposures.",
        ),
    };
    RuleCard {
        id: rule.as_str(),
        name: rule.name(),
        cwe: rule.cwe(),
        severity: rule.severity(),
        condition,
        remediation,
        notes,
    }
}

/// The card for a rule id.
pub fn explain(id: &str) -> Result<RuleCard, UnknownRule> {
    id.parse::<RuleId>()
        .map(card)
        .map_err(|_| UnknownRule { id: id.to_string() })
}

impl RuleCard {
    /// Plain-text rendering.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{} ({})\n  name:        {}\n  severity:    {}\n  condition:   {}\n  remediation: {}\n",
            self.id,
            self.cwe,
            self.name,
            self.severity.as_str(),
            self.condition,
            self.remediation
        );
        if !self.notes.is_empty() {
            out.push_str(&format!("  notes:       {}\n", self.notes));
        }
        out
    }
}
