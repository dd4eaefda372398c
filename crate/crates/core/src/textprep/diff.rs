use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;

/// Keeps the first `max_tokens` whitespace-delimited tokens of a diff,
/// preserving the original separators between the kept tokens. A diff at or
/// under the limit is returned unchanged.
pub fn truncate_diff(diff: &str, max_tokens: usize) -> &str {
    debug_assert!(max_tokens >= 1);
    let mut seen = 0usize;
    let mut in_token = false;
    for (i, c) in diff.char_indices() {
        if c.is_whitespace() {
            if in_token {
                in_token = false;
                if seen == max_tokens {
                    return &diff[..i];
                }
            }
        } else if !in_token {
            in_token = true;
            seen += 1;
        }
    }
    diff
}

fn ident_pattern() -> &'static Regex {
    static IDENT: OnceLock<Regex> = OnceLock::new();
    IDENT.get_or_init(|| Regex::new(r"[A-Za-z_][A-Za-z0-9_]*").expect("valid pattern"))
}

/// Deterministic stand-in for the generation model so the pipeline runs
/// offline. Summarizes a unified diff as
/// `modifies <k> file(s): <paths>; adds <a> line(s); removes <r> line(s);
/// touches identifiers: <top 5>`.
///
/// Identifiers are ranked by frequency over changed lines (string literal
/// contents excluded), ties broken by first appearance. A non-empty diff
/// with no recognizable file header degrades to `modifies unknown files`.
pub fn fallback_generate(diff: &str) -> String {
    if diff.trim().is_empty() {
        return "modifies 0 file(s); adds 0 line(s); removes 0 line(s)".to_string();
    }

    let mut files: Vec<String> = Vec::new();
    let mut pending_old: Option<String> = None;
    let mut adds = 0usize;
    let mut removes = 0usize;
    let mut changed: Vec<&str> = Vec::new();

    let push_file = |files: &mut Vec<String>, path: &str| {
        let path = strip_side(path);
        if !path.is_empty() && !files.iter().any(|f| f == path) {
            files.push(path.to_string());
        }
    };

    for line in diff.lines() {
        if let Some(rest) = line.strip_prefix("diff --git ") {
            if let Some(side) = rest.split_whitespace().last() {
                push_file(&mut files, side);
            }
        } else if let Some(rest) = line.strip_prefix("+++ ") {
            let path = rest.trim();
            if path != "/dev/null" {
                push_file(&mut files, path);
            } else if let Some(old) = pending_old.take() {
                push_file(&mut files, &old);
            }
        } else if let Some(rest) = line.strip_prefix("--- ") {
            let path = rest.trim();
            pending_old = (path != "/dev/null").then(|| path.to_string());
        } else if let Some(rest) = line.strip_prefix('+') {
            adds += 1;
            changed.push(rest);
        } else if let Some(rest) = line.strip_prefix('-') {
            removes += 1;
            changed.push(rest);
        }
    }

    if files.is_empty() {
        return "modifies unknown files".to_string();
    }

    let mut out = format!(
        "modifies {} file(s): {}; adds {} line(s); removes {} line(s)",
        files.len(),
        files.join(", "),
        adds,
        removes
    );
    let idents = top_identifiers(&changed, 5);
    if !idents.is_empty() {
        out.push_str("; touches identifiers: ");
        out.push_str(&idents.join(", "));
    }
    out
}

fn strip_side(path: &str) -> &str {
    path.strip_prefix("a/")
        .or_else(|| path.strip_prefix("b/"))
        .unwrap_or(path)
}

fn top_identifiers(changed_lines: &[&str], limit: usize) -> Vec<String> {
    // (first appearance index, occurrence count) per lowercased identifier.
    let mut tally: HashMap<String, (usize, usize)> = HashMap::new();
    let mut next_index = 0usize;
    for line in changed_lines {
        let bare = mask_string_literals(line);
        for m in ident_pattern().find_iter(&bare) {
            let key = m.as_str().to_lowercase();
            let entry = tally.entry(key).or_insert_with(|| {
                let idx = next_index;
                next_index += 1;
                (idx, 0)
            });
            entry.1 += 1;
        }
    }
    let mut ranked: Vec<(String, (usize, usize))> = tally.into_iter().collect();
    ranked.sort_by(|a, b| b.1 .1.cmp(&a.1 .1).then(a.1 .0.cmp(&b.1 .0)));
    ranked.truncate(limit);
    ranked.into_iter().map(|(ident, _)| ident).collect()
}

/// Blanks out double-quoted string contents so quoted words are not counted
/// as identifiers.
fn mask_string_literals(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut in_string = false;
    let mut escaped = false;
    for c in line.chars() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            out.push(' ');
        } else if c == '"' {
            in_string = true;
            out.push(' ');
        } else {
            out.push(c);
        }
    }
    out
}

/// Test fixture mirroring the plugin metadata sanitization change: one
/// removed line, seven added lines, one file touched.
#[cfg(test)]
pub(crate) const PLUGIN_MANAGER_DIFF: &str = "\
--- a/core/src/main/java/hudson/PluginManager.java
+++ b/core/src/main/java/hudson/PluginManager.java
@@ -1469,7 +1469,11 @@ public HttpResponse doPluginSearch(...)
     jsonObject.put(\"sourceId\", plugin.sourceId);
     jsonObject.put(\"title\", plugin.title);
     jsonObject.put(\"displayName\", plugin.getDisplayName());
-    jsonObject.put(\"wiki\", plugin.wiki);
+    if (plugin.wiki == null || !(plugin.wiki.
+        startsWith(\"https://\") ||
+        plugin.wiki.startsWith(\"http://\"))) {
+        jsonObject.put(\"wiki\", StringUtils.EMPTY);
+    } else {
+        jsonObject.put(\"wiki\", plugin.wiki);
+    }
     jsonObject.put(\"categories\", plugin.
";

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn summarizes_the_plugin_manager_fix() {
        assert_eq!(
            fallback_generate(PLUGIN_MANAGER_DIFF),
            "modifies 1 file(s): core/src/main/java/hudson/PluginManager.java; \
adds 7 line(s); removes 1 line(s); \
touches identifiers: plugin, wiki, jsonobject, put, startswith"
        );
    }

    #[test]
    fn empty_diff_reports_zeroes() {
        assert_eq!(
            fallback_generate(""),
            "modifies 0 file(s); adds 0 line(s); removes 0 line(s)"
        );
        assert_eq!(
            fallback_generate("  \n "),
            "modifies 0 file(s); adds 0 line(s); removes 0 line(s)"
        );
    }

    #[test]
    fn headerless_diff_degrades() {
        assert_eq!(fallback_generate("+x = 1\n-x = 2\n"), "modifies unknown files");
    }

    #[test]
    fn two_file_headers_are_listed_in_order() {
        let diff = "\
--- a/src/alpha.c
+++ b/src/alpha.c
@@ -1 +1 @@
-old_alpha();
+new_alpha();
--- a/src/beta.c
+++ b/src/beta.c
@@ -1 +1 @@
+beta_call();
";
        let summary = fallback_generate(diff);
        assert!(summary.starts_with("modifies 2 file(s): src/alpha.c, src/beta.c; "));
        assert!(summary.contains("adds 2 line(s); removes 1 line(s)"));
    }

    #[test]
    fn deleted_file_uses_the_old_path() {
        let diff = "\
--- a/gone.py
+++ /dev/null
@@ -1 +0,0 @@
-removed_call()
";
        assert!(fallback_generate(diff).starts_with("modifies 1 file(s): gone.py;"));
    }

    #[test]
    fn quoted_words_are_not_identifiers() {
        let diff = "\
--- a/x.c
+++ b/x.c
@@ -1 +1 @@
+log(\"alpha alpha alpha alpha\", beta);
";
        let summary = fallback_generate(diff);
        assert!(summary.ends_with("touches identifiers: log, beta"));
    }

    #[test]
    fn truncation_is_a_noop_under_the_limit() {
        let diff = "one two three";
        assert_eq!(truncate_diff(diff, 100), diff);
        assert_eq!(truncate_diff("", 5), "");
    }

    #[test]
    fn truncation_keeps_separators_between_kept_tokens() {
        let diff = "a  b\tc\nd e";
        assert_eq!(truncate_diff(diff, 3), "a  b\tc");
        assert_eq!(truncate_diff(" lead a b", 2), " lead a");
    }

    proptest! {
        #[test]
        fn truncation_yields_a_prefix_with_bounded_tokens(
            diff in "[ a-z\\t\\n]{0,200}",
            max in 1usize..50,
        ) {
            let cut = truncate_diff(&diff, max);
            prop_assert!(diff.starts_with(cut));
            let want = diff.split_whitespace().count().min(max);
            prop_assert_eq!(cut.split_whitespace().count(), want);
            // Cutting twice changes nothing.
            prop_assert_eq!(truncate_diff(cut, max), cut);
        }

        #[test]
        fn fallback_is_deterministic(diff in "[ -~\\n]{0,400}") {
            prop_assert_eq!(fallback_generate(&diff), fallback_generate(&diff));
        }
    }
}
