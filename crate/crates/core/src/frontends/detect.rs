//! Tool classification from file name conventions and content heuristics.

use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::ToolKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot determine the IaC tool for `{path}`; pass --tool explicitly")]
pub struct UnknownTool {
    pub path: String,
}

static SALT_STATE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?m)^\s*-?\s*(pkg|file|service|cmd|user|group|pip|gem|git|archive|cron|mount|sysctl|module|test|host|ssh_auth|npm|docker_container)\.[a-z_]+\s*:",
    )
    .unwrap()
});
static ANSIBLE_KEYS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^\s*-?\s*(hosts|tasks|roles|handlers|become|gather_facts)\s*:").unwrap());
static TF_BLOCK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?m)^\s*(resource|provider|module|variable|output|data|terraform|locals)(\s+"[^"]*")*\s*\{"#)
        .unwrap()
});
static PUPPET_RES: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?m)^\s*(class|node|define|[a-z_:]+\s*\{\s*['"$][^:]*:)|=>"#).unwrap()
});
static CHEF_DSL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"(?m)^\s*(package|template|cookbook_file|execute|bash|service|remote_file|directory|user|include_recipe|node\.default|gem_package)\b[\s(]"#,
    )
    .unwrap()
});
static PULUMI_IMPORT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(@pulumi/|import\s+pulumi|from\s+pulumi|require\(\s*['"]@pulumi)"#).unwrap()
});

/// Decide the tool for a file. Name conventions win over content.
pub fn detect_tool(path: &str, content: &str) -> Result<ToolKind, UnknownTool> {
    let p = Path::new(path);
    let file_name = p
        .file_name()
        .and_then(|f| f.to_str())
        .unwrap_or("")
        .to_string();
    let ext = p
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let components: Vec<String> = p
        .components()
        .filter_map(|c| c.as_os_str().to_str())
        .map(|s| s.to_ascii_lowercase())
        .collect();
    let unknown = || UnknownTool {
        path: path.to_string(),
    };

    if file_name == "Vagrantfile" || file_name.ends_with(".vagrantfile") {
        return Ok(ToolKind::Vagrant);
    }
    if file_name.starts_with("Pulumi") && matches!(ext.as_str(), "yaml" | "yml") {
        return Ok(ToolKind::Pulumi);
    }
    match ext.as_str() {
        "tf" | "tfvars" | "hcl" => return Ok(ToolKind::Terraform),
        "pp" => return Ok(ToolKind::Puppet),
        "sls" => return Ok(ToolKind::Saltstack),
        "rb" => {
            if content.contains("Vagrant.configure") {
                return Ok(ToolKind::Vagrant);
            }
            if components
                .iter()
                .any(|c| matches!(c.as_str(), "recipes" | "cookbooks" | "resources" | "attributes"))
                || CHEF_DSL.is_match(content)
            {
                return Ok(ToolKind::Chef);
            }
            return Err(unknown());
        }
        "ts" | "js" | "mjs" | "py" => {
            if PULUMI_IMPORT.is_match(content) {
                return Ok(ToolKind::Pulumi);
            }
            return Err(unknown());
        }
        "yml" | "yaml" => {
            if SALT_STATE.is_match(content) && !ANSIBLE_KEYS.is_match(content) {
                return Ok(ToolKind::Saltstack);
            }
            return Ok(ToolKind::Ansible);
        }
        _ => {}
    }

    // Unknown extension: content heuristics.
    if content.contains("Vagrant.configure") {
        Ok(ToolKind::Vagrant)
    } else if ANSIBLE_KEYS.is_match(content) {
        Ok(ToolKind::Ansible)
    } else if SALT_STATE.is_match(content) {
        Ok(ToolKind::Saltstack)
    } else if TF_BLOCK.is_match(content) {
        Ok(ToolKind::Terraform)
    } else if PULUMI_IMPORT.is_match(content) {
        Ok(ToolKind::Pulumi)
    } else if PUPPET_RES.is_match(content) {
        Ok(ToolKind::Puppet)
    } else if CHEF_DSL.is_match(content) {
        Ok(ToolKind::Chef)
    } else {
        Err(unknown())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn by_name() {
        assert_eq!(detect_tool("Vagrantfile", "puts 1").unwrap(), ToolKind::Vagrant);
        assert_eq!(detect_tool("infra/main.tf", "").unwrap(), ToolKind::Terraform);
        assert_eq!(detect_tool("site.pp", "").unwrap(), ToolKind::Puppet);
        assert_eq!(detect_tool("top.sls", "").unwrap(), ToolKind::Saltstack);
        assert_eq!(
            detect_tool("cookbooks/web/recipes/default.rb", "").unwrap(),
            ToolKind::Chef
        );
        assert_eq!(detect_tool("Pulumi.dev.yaml", "").unwrap(), ToolKind::Pulumi);
    }

    #[test]
    fn yaml_flavours() {
        let play = "- hosts: all\n  tasks:\n    - debug: msg=hi\n";
        assert_eq!(detect_tool("site.yml", play).unwrap(), ToolKind::Ansible);
        let state = "nginx:\n  pkg.installed: []\n";
        assert_eq!(detect_tool("init.yaml", state).unwrap(), ToolKind::Saltstack);
    }

    #[test]
    fn by_content() {
        assert_eq!(
            detect_tool("index.ts", "import * as aws from \"@pulumi/aws\";").unwrap(),
            ToolKind::Pulumi
        );
        assert_eq!(
            detect_tool("stack", "resource \"a\" \"b\" {\n}\n").unwrap(),
            ToolKind::Terraform
        );
        let err = detect_tool("notes.txt", "hello").unwrap_err();
        assert!(err.to_string().contains("--tool"));
    }
}
