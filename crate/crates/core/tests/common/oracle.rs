//! Random single-task snippets and a truth-table re-derivation of the rules.

#![allow(dead_code)]

use std::collections::BTreeSet;

use iacsmell_core::frontends::{ParsedFile, ToolKind};
use iacsmell_core::predicates::*;
use iacsmell_core::rules::RuleId;
use rand::seq::SliceRandom;
use rand::Rng;

const VARS: &[&str] = &["action", "user_input", "pkg_name", "target_dir", "db_password", "api_token", "item", "n"];
const FILTERS: &[&str] = &["", "", "", " | quote", " | int", " | basename", " | default('x')"];
const SENSITIVE: &[&str] = &["db_password", "api_token", "aws_secret_access_key", "private_key", "admin_pass"];
const PLAIN_KEYS: &[&str] = &["app_port", "service_user", "log_level", "listen_addr"];
const NAMES: &[&str] = &["doitnow", "tmp", "x", "webAppConfig_path", "nginx_root", "deploy_user", "foo"];
const PKGS: &[&str] = &["apache2", "nginx", "openssl", "python2.7", "curl", "requests", "pyyaml"];
const VERSIONS: &[&str] = &["", "1.0.1", "2.4.52", "latest", "1.24.0", "5.3", "2.19.0", ">=1.0"];

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).unwrap()
}

fn interp<R: Rng>(rng: &mut R) -> String {
    format!("{{{{ {}{} }}}}", pick(rng, VARS), pick(rng, FILTERS))
}

fn maybe_interp<R: Rng>(rng: &mut R, literal: &str) -> String {
    if rng.gen_bool(0.6) {
        interp(rng)
    } else {
        literal.to_string()
    }
}

fn ansible_task<R: Rng>(rng: &mut R) -> String {
    let mut t = format!("- name: task {}\n", rng.gen_range(1..100));
    match rng.gen_range(0..11) {
        0 => t += &format!("  shell: \"{} {}\"\n", pick(rng, &["echo", "rm -rf", "systemctl restart", "python -c", "echo $(("]), interp(rng)),
        1 => t += &format!("  command: \"apt-get {}\"\n", maybe_interp(rng, "update")),
        2 => {
            t += &format!("  copy:\n    src: \"{}\"\n    dest: {}\n", maybe_interp(rng, "files/app.conf"), pick(rng, &["/etc/app.conf", "/etc/sudoers.d/ops", "/srv/data.txt"]));
            if rng.gen_bool(0.4) {
                t += &format!("    content: |\n      {} = {}\n", pick(rng, &[SENSITIVE, PLAIN_KEYS].concat()), maybe_interp(rng, "s3cr3tvalue"));
            }
        }
        3 => t += &format!("  file:\n    path: /etc/{}.txt\n    state: touch\n", pick(rng, NAMES)),
        4 => {
            let v = pick(rng, VERSIONS);
            t += &format!("  apt:\n    name: \"{}\"\n", pick(rng, PKGS));
            if !v.is_empty() {
                t += &format!("    version: \"{v}\"\n");
            }
            t += &format!("    state: {}\n", pick(rng, &["present", "latest"]));
        }
        5 => t += &format!(
            "  pip:\n    name: {}\n    extra_args: \"--index-url {}\"\n",
            pick(rng, PKGS),
            pick(rng, &["https://pypi.org/simple", "http://mirror.example.com/simple"])
        ),
        6 => t += &format!(
            "  lineinfile:\n    path: {}\n    line: '{}'\n",
            pick(rng, &["/etc/ssh/sshd_config", "/tmp/notes.txt", "{{ cfg_path }}"]),
            pick(rng, &["PermitRootLogin yes", "PermitRootLogin no", "PasswordAuthentication yes", "Port 22"])
        ),
        7 => t += &format!("  debug:\n    msg: \"value is {}\"\n", interp(rng)),
        8 => t += &format!("  set_fact:\n    {}: \"{}\"\n", pick(rng, NAMES), maybe_interp(rng, "ok")),
        9 => t += &format!("  get_url:\n    url: \"https://example.com/{}\"\n    dest: \"{}\"\n", maybe_interp(rng, "a.tgz"), maybe_interp(rng, "/opt/a.tgz")),
        _ => t += &format!("  user:\n    name: {}\n    shell: /bin/bash\n", maybe_interp(rng, "deploy")),
    }
    if rng.gen_bool(0.3) {
        t += &format!("  vars:\n    {}: \"{}\"\n", pick(rng, &[SENSITIVE, PLAIN_KEYS, NAMES].concat()), pick(rng, &["hunter2pass", "changeme", "8080", "{{ vault_x }}"]));
    }
    if rng.gen_bool(0.2) {
        t += &format!("  register: {}\n", pick(rng, NAMES));
    }
    if rng.gen_bool(0.15) {
        t += "  no_log: true\n";
    }
    if rng.gen_bool(0.1) {
        t += &format!("  when: {} is match('^[a-z]+$')\n", pick(rng, VARS));
    }
    t
}

fn terraform_block<R: Rng>(rng: &mut R) -> String {
    match rng.gen_range(0..4) {
        0 => format!(
            "module \"{}\" {{\n  source = \"{}\"\n{}}}\n",
            pick(rng, NAMES),
            pick(rng, &["terraform-aws-modules/vpc/aws", "git::http://git.example.com/net.git", "./modules/net"]),
            if rng.gen_bool(0.5) { "  version = \"5.1.2\"\n" } else { "" }
        ),
        1 => format!(
            "variable \"{}\" {{\n  default = \"{}\"\n}}\n",
            pick(rng, &[SENSITIVE, PLAIN_KEYS].concat()),
            pick(rng, &["hunter2pass", "", "8080"])
        ),
        2 => format!(
            "resource \"null_resource\" \"{}\" {{\n  provisioner \"local-exec\" {{\n    command = \"./run.sh ${{{}}}\"\n  }}\n}}\n",
            pick(rng, NAMES),
            pick(rng, &["var.env", "path.module", "var.target"])
        ),
        _ => format!(
            "resource \"local_file\" \"{}\" {{\n  filename = \"{}\"\n  content  = \"{}\"\n}}\n",
            pick(rng, NAMES),
            pick(rng, &["/etc/ssh/sshd_config", "/var/out/${var.name}", "${path.module}/out.txt"]),
            pick(rng, &["PermitRootLogin yes", "hello"])
        ),
    }
}

fn puppet_resource<R: Rng>(rng: &mut R) -> String {
    match rng.gen_range(0..3) {
        0 => format!(
            "exec {{ '{}':\n  command => \"{} ${{{}}}\",\n}}\n",
            pick(rng, NAMES),
            pick(rng, &["/bin/echo", "python -c", "/usr/bin/make"]),
            pick(rng, VARS)
        ),
        1 => format!("package {{ '{}':\n  ensure => {},\n}}\n", pick(rng, PKGS), pick(rng, &["latest", "installed", "'1.0.1'", "'2.4.52'"])),
        _ => format!("${} = '{}'\n", pick(rng, &[SENSITIVE, NAMES].concat()), pick(rng, &["hunter2pass", "changeme"])),
    }
}

/// A random single-task (or single-block) snippet.
pub fn snippet<R: Rng>(rng: &mut R) -> (ToolKind, String) {
    match rng.gen_range(0..10) {
        0 | 1 => (ToolKind::Terraform, terraform_block(rng)),
        2 => (ToolKind::Puppet, puppet_resource(rng)),
        _ => {
            let task = ansible_task(rng);
            let body: String = task.lines().map(|l| format!("    {l}\n")).collect();
            (ToolKind::Ansible, format!("- name: generated\n  hosts: all\n  tasks:\n{body}"))
        }
    }
}

/// Every (rule, line) the truth table says should fire, from each node's
/// predicate values.
pub fn oracle(file: &ParsedFile, ctx: &PredicateContext<'_>) -> BTreeSet<(RuleId, usize)> {
    let mut out = BTreeSet::new();
    for nr in node_refs(&file.root) {
        let scalar = nr.node.is_scalar_like();

        let cfg = is_config_file(&nr, ctx).is_some();
        let setting = is_sensitive_setting(&nr, ctx);
        if scalar && cfg {
            if let Some(e) = &setting {
                out.insert((RuleId::InsecureConfigurationManagement, e.span.start_line));
            }
        }

        if let Some(dep) = is_dependency(&nr, ctx) {
            if let Some(ev) = dep.primary_evidence() {
                let line = ev.span.start_line;
                let outdated = is_outdated_version(&dep, ctx).record.is_some();
                let vulnerable = !has_known_vulnerabilities(&dep, ctx).is_empty();
                let unlocked = lacks_version_locking(&dep);
                let untrusted = is_untrusted_source(&dep, ctx);
                let table = [
                    (RuleId::OutdatedDependencies, outdated && vulnerable),
                    (RuleId::OutdatedSoftwareVersion, outdated && !vulnerable),
                    (RuleId::InsecureDependencyManagement, !outdated && (unlocked || untrusted)),
                ];
                for (r, fires) in table {
                    if fires {
                        out.insert((r, line));
                    }
                }
            }
        }

        let user_input = scalar && is_user_input(&nr, ctx).is_some();
        let open = if user_input { unsanitized_inputs(&nr, ctx) } else { Vec::new() };
        if !open.is_empty() {
            let sink = is_command_sink(&nr, ctx).map(|s| s.kind);
            let path = is_file_path(&nr, ctx);
            let word = open.iter().find(|i| !in_arithmetic_context(i, &nr, ctx));
            let code = sink == Some(SinkKind::Interpreter);
            let ci = sink == Some(SinkKind::OsCommand) && word.is_some();
            let pt = path && sink.is_none();
            let iih = (sink.is_some() || path) && !code && !ci && !pt;
            let first = open[0].span.start_line;
            if code {
                out.insert((RuleId::CodeInjection, first));
            }
            if ci {
                out.insert((RuleId::CommandInjection, word.unwrap().span.start_line));
            }
            if pt {
                out.insert((RuleId::PathTraversal, first));
            }
            if iih {
                out.insert((RuleId::InsecureInputHandling, first));
            }
        }

        if let Some(res) = named_resource(&nr, ctx) {
            if follows_nonstandard_convention(&res.name, ctx).is_some() {
                out.insert((RuleId::InadequateNamingConvention, res.evidence.span.start_line));
            }
        }
        if let Some(x) = is_exposed(&nr, ctx) {
            out.insert((RuleId::SensitiveInformationExposure, x.evidence.span.start_line));
        }
    }
    out
}
