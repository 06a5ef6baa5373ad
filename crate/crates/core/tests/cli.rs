use std::path::{Path, PathBuf};
use std::process::Command;

use gptsm::cli::run_with_io;
use gptsm::llm_gateway::{ChatBackend, MockChat, MockScript};
use gptsm::renderers::{items_text, parse_json};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data").join(name)
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str], stdin: &str) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("gptsm").chain(args.iter().copied());
    let code = run_with_io(argv, &mut stdin.as_bytes(), &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&[], "").code, 2);
    assert_eq!(run(&["render", "--method", "bogus"], "").code, 2);
    assert_eq!(run(&["render", "--samples", "0"], "").code, 2);
    assert_eq!(run(&["render", "--echo", "--floor", "1.5"], "x").code, 2);
    assert_eq!(run(&["render", "--echo", "--target-ratio", "0"], "x").code, 2);
    assert_eq!(run(&["render", "--method", "wf", "--wf-target", "1"], "x").code, 2);
    assert_eq!(run(&["cache"], "").code, 2);
}

#[test]
fn help_exits_0() {
    let r = run(&["--help"], "");
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("render"));
}

#[test]
fn echo_json_keeps_everything() {
    let src = "  Hello, world.\n\nA second  paragraph!\n";
    let r = run(&["render", "--echo", "--no-cache", "--format", "json"], src);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let items = parse_json(&r.stdout).unwrap();
    assert_eq!(items_text(&items), src);
    assert!(items.iter().flatten().all(|i| i.opacity == 1.0));
}

#[test]
fn scripted_render_fades_and_writes_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.html");
    let r = run(
        &[
            "render",
            "--mock",
            path_str(&data("deforestation.mock.json")),
            "--cache",
            path_str(&dir.path().join("cache")),
            "-o",
            path_str(&out),
            path_str(&data("deforestation.txt")),
        ],
        "",
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.is_empty());
    let html = std::fs::read_to_string(out).unwrap();
    assert!(html.contains("<span style=\"color:rgb(179,179,179)\">previously</span>"));
    assert!(html.contains("<span style=\"color:rgb(0,0,0)\">Deforestation</span>"));
    assert!(html.contains("id=\"gptsm-full\""));
}

#[test]
fn ansi_256_uses_palette_codes() {
    let r = run(
        &["render", "--mock", path_str(&data("deforestation.mock.json")), "--no-cache", "--format", "ansi", "--ansi-256"],
        &std::fs::read_to_string(data("deforestation.txt")).unwrap(),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("\x1b[38;5;16m"));
    assert!(!r.stdout.contains("\x1b[38;2;"));
}

#[test]
fn wf_needs_no_backend() {
    let r = run(&["render", "--method", "wf", "--format", "json", "--wf-target", "0.4"], "the cat and the dog and the end");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let items = parse_json(&r.stdout).unwrap();
    assert!(items.iter().flatten().any(|i| i.opacity < 1.0));
}

#[test]
fn offline_with_cold_cache_exits_1_naming_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cold");
    let r = run(&["render", "--offline", "--cache", path_str(&cache)], "Some text.");
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains(path_str(&cache)), "{}", r.stderr);
}

#[test]
fn offline_replay_matches_the_warm_run() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let mock = data("deforestation.mock.json");
    let input = std::fs::read_to_string(data("deforestation.txt")).unwrap();
    let warm = run(&["render", "--mock", path_str(&mock), "--cache", path_str(&cache), "--format", "json"], &input);
    assert_eq!(warm.code, 0, "{}", warm.stderr);

    let chat_id = MockChat::Scripted(MockScript::load(&mock).unwrap()).id();
    let offline = [
        "render",
        "--offline",
        "--cache",
        path_str(&cache),
        "--format",
        "json",
        "--chat-model",
        &chat_id,
        "--embed-model",
        "mock-hash-64",
    ];
    let first = run(&offline, &input);
    let second = run(&offline, &input);
    assert_eq!(first.code, 0, "{}", first.stderr);
    assert_eq!(first.stdout, warm.stdout);
    assert_eq!(second.stdout, first.stdout);

    // A model that was never cached misses and fails the run.
    let miss = run(&["render", "--offline", "--cache", path_str(&cache), "--chat-model", "other"], &input);
    assert_eq!(miss.code, 1);
    assert!(miss.stderr.contains("offline"), "{}", miss.stderr);
}

#[test]
fn compare_puts_both_methods_side_by_side() {
    let r = run(
        &["compare", "--mock", path_str(&data("deforestation.mock.json")), "--no-cache"],
        &std::fs::read_to_string(data("deforestation.txt")).unwrap(),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("<h2>GP-TSM</h2>"));
    assert!(r.stdout.contains("<h2>NGP-TSM</h2>"));
    assert_eq!(r.stdout.matches("<article class=\"gptsm-doc\">").count(), 2);
}

#[test]
fn cache_stats_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("c");
    let r = run(&["cache", "stats", "--cache", path_str(&cache)], "");
    assert_eq!(r.code, 0);
    assert!(r.stdout.starts_with("0 entries"), "{}", r.stdout);

    let warm = run(
        &["render", "--mock", path_str(&data("deforestation.mock.json")), "--cache", path_str(&cache)],
        &std::fs::read_to_string(data("deforestation.txt")).unwrap(),
    );
    assert_eq!(warm.code, 0, "{}", warm.stderr);
    let stats = run(&["cache", "stats", "--cache", path_str(&cache)], "");
    assert!(!stats.stdout.starts_with("0 entries"));
    assert_eq!(run(&["cache", "verify", "--cache", path_str(&cache)], "").code, 0);

    let file = cache.join("entries.jsonl");
    let mut text = std::fs::read_to_string(&file).unwrap();
    let second_line = text.find('\n').unwrap() + 1;
    let flip = text[second_line..].find("\"resp\"").unwrap() + second_line + 8;
    text.replace_range(flip..flip + 1, "#");
    std::fs::write(&file, text).unwrap();
    let bad = run(&["cache", "verify", "--cache", path_str(&cache)], "");
    assert_eq!(bad.code, 1);
    assert!(bad.stderr.contains("entries.jsonl:2:"), "{}", bad.stderr);
}

#[test]
fn missing_input_is_an_io_error() {
    let r = run(&["render", "--echo", "/nonexistent/input.txt"], "");
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("/nonexistent/input.txt"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_gptsm");
    let usage = Command::new(bin).arg("render").arg("--format=pdf").output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
    let ok = Command::new(bin)
        .args(["render", "--echo", "--no-cache", "--format", "json"])
        .arg(data("deforestation.txt"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let offline = Command::new(bin)
        .args(["render", "--offline", "--cache"])
        .arg(dir.path())
        .arg(data("deforestation.txt"))
        .output()
        .unwrap();
    assert_eq!(offline.status.code(), Some(1));
}

#[test]
fn wf_ansi_on_empty_stdin_is_empty() {
    let r = run(&["render", "--method", "wf", "--format", "ansi", "-"], "");
    assert_eq!(r.code, 0);
    assert_eq!(r.stdout, "");
}

#[test]
fn scripted_json_keeps_the_final_level() {
    let r = run(
        &["render", "--method", "gp", "--format", "json", "--mock", path_str(&data("deforestation.mock.json")), "--no-cache"],
        &std::fs::read_to_string(data("deforestation.txt")).unwrap(),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let items = parse_json(&r.stdout).unwrap();
    let kept: Vec<String> = items
        .iter()
        .flatten()
        .filter(|i| i.opacity == 1.0 && !i.text.is_empty())
        .map(|i| i.text.clone())
        .collect();
    let last = "Deforestation speeds up the loss of nutrients. It also involves a release of carbon. Forests play a \
                critical role in helping to protect the land and stabilize the atmosphere.";
    assert_eq!(kept, gptsm::text_model::unit_words(last));
}

fn article_texts(html: &str) -> Vec<String> {
    let article = regex::Regex::new(r#"(?s)<article class="gptsm-doc">(.*?)</article>"#).unwrap();
    let tag = regex::Regex::new(r"<[^>]*>").unwrap();
    article
        .captures_iter(html)
        .map(|c| tag.replace_all(&c[1], "").replace("&amp;", "&"))
        .collect()
}

#[test]
fn compare_columns_differ_only_in_styling() {
    let src = "Rivers, it is said, carry silt a very long way downstream.\n";
    let dir = tempfile::tempdir().unwrap();
    let script = |gp: &str, ngp: &str| {
        let json = serde_json::json!({"entries": [
            {"kind": "shorten_gp", "paragraph_text": src.trim_end(), "round": 1, "responses": [gp]},
            {"kind": "shorten_ngp", "paragraph_text": src.trim_end(), "round": 1, "responses": [ngp]},
        ]});
        let path = dir.path().join(format!("{}.json", gp.len() * 100 + ngp.len()));
        std::fs::write(&path, json.to_string()).unwrap();
        path
    };
    let columns = |path: &Path| {
        let r = run(&["compare", "--mock", path_str(path), "--no-cache"], src);
        assert_eq!(r.code, 0, "{}", r.stderr);
        let body: Vec<String> = regex::Regex::new(r#"(?s)<article.*?</article>"#)
            .unwrap()
            .find_iter(&r.stdout)
            .map(|m| m.as_str().to_string())
            .collect();
        (article_texts(&r.stdout), body)
    };

    let same = script("Rivers carry silt a very long way downstream.", "Rivers carry silt a very long way downstream.");
    let (texts, cols) = columns(&same);
    assert_eq!(texts, [src, src]);
    assert_eq!(cols[0], cols[1]);

    let differ = script("Rivers carry silt a very long way downstream.", "Rivers, it is said, carry silt long way downstream.");
    let (texts, cols) = columns(&differ);
    assert_eq!(texts, [src, src]);
    let faded = |col: &str| -> Vec<String> {
        regex::Regex::new(r#"<span style="color:rgb\(179,179,179\)">([^<]*)</span>"#)
            .unwrap()
            .captures_iter(col)
            .map(|c| c[1].to_string())
            .collect()
    };
    assert_eq!(faded(&cols[0]), [",", "it", "is", "said", ","]);
    assert_eq!(faded(&cols[1]), ["a", "very"]);
}
