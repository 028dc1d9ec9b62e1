//! Code-point substitution tables for character-variant standardization and
//! traditional→simplified conversion.
//!
//! Tables map single scalar values to single scalar values, so application is
//! length-preserving and report offsets stay aligned with source text. A valid
//! table is idempotent by construction: no target is itself a key.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MappingTable {
    name: String,
    entries: HashMap<char, char>,
}

impl MappingTable {
    /// Build a table from pairs, enforcing the invariants checked at load:
    /// no duplicate source, no self-mapping, no key in the image.
    pub fn from_pairs(
        name: impl Into<String>,
        pairs: impl IntoIterator<Item = (char, char)>,
    ) -> Result<MappingTable> {
        let name = name.into();
        let mut entries = HashMap::new();
        for (src, dst) in pairs {
            if src == dst {
                return Err(Error::Invalid(format!(
                    "table {name:?}: {src:?} maps to itself"
                )));
            }
            if entries.insert(src, dst).is_some() {
                return Err(Error::Invalid(format!(
                    "table {name:?}: duplicate source {src:?}"
                )));
            }
        }
        let table = MappingTable { name, entries };
        table.check_idempotent()?;
        Ok(table)
    }

    /// Load a TSV of `source<TAB>target` scalar pairs. `#` lines and blank
    /// lines are ignored.
    pub fn load(path: &Path) -> Result<MappingTable> {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "mapping".into());
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (idx, line) in raw.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (src, dst) = line.split_once('\t').ok_or_else(|| {
                Error::parse(path, line_no, "expected `source<TAB>target`")
            })?;
            let src = single_scalar(src)
                .ok_or_else(|| Error::parse(path, line_no, "source is not a single code point"))?;
            let dst = single_scalar(dst)
                .ok_or_else(|| Error::parse(path, line_no, "target is not a single code point"))?;
            pairs.push((src, dst));
        }
        MappingTable::from_pairs(name, pairs)
            .map_err(|e| Error::parse(path, 0, e.to_string()))
    }

    fn check_idempotent(&self) -> Result<()> {
        for (src, dst) in &self.entries {
            if self.entries.contains_key(dst) {
                return Err(Error::Invalid(format!(
                    "table {:?}: target {dst:?} of {src:?} is itself a key; application would not be idempotent",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, c: char) -> Option<char> {
        self.entries.get(&c).copied()
    }

    /// Replace every key code point by its target, leaving everything else
    /// untouched. Output has the same number of scalar values as the input.
    pub fn apply(&self, text: &str) -> String {
        text.chars()
            .map(|c| self.entries.get(&c).copied().unwrap_or(c))
            .collect()
    }

    /// Table equivalent to applying `self` then `second` in sequence:
    /// `compose(f, s).apply(x) == s.apply(f.apply(x))` for every `x`.
    /// Fails when the sequential application is not expressible as a single
    /// idempotent table.
    pub fn compose(&self, second: &MappingTable) -> Result<MappingTable> {
        let mut pairs = Vec::new();
        for (&src, &dst) in &self.entries {
            let target = second.lookup(dst).unwrap_or(dst);
            if target != src {
                pairs.push((src, target));
            }
        }
        for (&src, &dst) in &second.entries {
            if !self.entries.contains_key(&src) {
                pairs.push((src, dst));
            }
        }
        pairs.sort_unstable();
        MappingTable::from_pairs(format!("{}+{}", self.name, second.name), pairs)
    }

    /// Compose a whole chain, erroring on the first invalid intermediate.
    pub fn compose_all(tables: &[MappingTable]) -> Result<MappingTable> {
        match tables {
            [] => MappingTable::from_pairs("identity", []),
            [first, rest @ ..] => {
                let mut acc = first.clone();
                for t in rest {
                    acc = acc.compose(t)?;
                }
                Ok(acc)
            }
        }
    }

    /// Entries in sorted order, for serialization and diffing.
    pub fn sorted_entries(&self) -> Vec<(char, char)> {
        let mut v: Vec<(char, char)> = self.entries.iter().map(|(&s, &d)| (s, d)).collect();
        v.sort_unstable();
        v
    }
}

fn single_scalar(s: &str) -> Option<char> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn table(pairs: &[(char, char)]) -> MappingTable {
        MappingTable::from_pairs("test", pairs.iter().copied()).unwrap()
    }

    /// Naive per-character oracle used against `apply`.
    fn apply_oracle(pairs: &[(char, char)], text: &str) -> String {
        let mut out = String::new();
        'chars: for c in text.chars() {
            for &(src, dst) in pairs {
                if c == src {
                    out.push(dst);
                    continue 'chars;
                }
            }
            out.push(c);
        }
        out
    }

    #[test]
    fn apply_replaces_mapped_code_points() {
        let t = table(&[('經', '经'), ('濟', '济')]);
        assert_eq!(t.apply("經濟"), "经济");
        assert_eq!(t.apply("经济"), "经济");
    }

    #[test]
    fn empty_table_is_identity() {
        let t = MappingTable::from_pairs("empty", []).unwrap();
        assert_eq!(t.apply("任何 text 123"), "任何 text 123");
    }

    #[test]
    fn load_rejects_self_mapping() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "經\t經").unwrap();
        let err = MappingTable::load(f.path()).unwrap_err();
        assert!(err.to_string().contains("maps to itself"), "{err}");
    }

    #[test]
    fn load_rejects_key_in_image() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "A\tB").unwrap();
        writeln!(f, "B\tC").unwrap();
        let err = MappingTable::load(f.path()).unwrap_err();
        assert!(err.to_string().contains("idempotent"), "{err}");
    }

    #[test]
    fn load_rejects_duplicates_and_multichar() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "A\tB").unwrap();
        writeln!(f, "A\tC").unwrap();
        assert!(MappingTable::load(f.path()).is_err());

        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "AB\tC").unwrap();
        assert!(MappingTable::load(f.path()).is_err());
    }

    #[test]
    fn load_parses_comments_and_counts_entries() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# variant table").unwrap();
        writeln!(f, "經\t经").unwrap();
        writeln!(f, "").unwrap();
        writeln!(f, "濟\t济").unwrap();
        let t = MappingTable::load(f.path()).unwrap();
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn compose_chains_targets() {
        let f = table(&[('A', 'B')]);
        let s = table(&[('B', 'C')]);
        let c = f.compose(&s).unwrap();
        assert_eq!(c.sorted_entries(), vec![('A', 'C'), ('B', 'C')]);
    }

    #[test]
    fn compose_with_empty_is_identity_element() {
        let t = table(&[('甲', '乙'), ('丙', '丁')]);
        let empty = MappingTable::from_pairs("empty", []).unwrap();
        assert_eq!(
            t.compose(&empty).unwrap().sorted_entries(),
            t.sorted_entries()
        );
        assert_eq!(
            empty.compose(&t).unwrap().sorted_entries(),
            t.sorted_entries()
        );
    }

    #[test]
    fn compose_rejects_non_idempotent_result() {
        let f = table(&[('A', 'B')]);
        let s = table(&[('B', 'C'), ('C', 'A')]);
        assert!(f.compose(&s).is_err());
    }

    fn han(i: usize) -> char {
        char::from_u32(0x4E00 + i as u32).unwrap()
    }

    fn dedup_pairs(raw: Vec<(char, char)>) -> Vec<(char, char)> {
        let mut seen = std::collections::HashSet::new();
        raw.into_iter().filter(|&(src, _)| seen.insert(src)).collect()
    }

    /// Keys from a Han pool, targets from `A..=Z`: always a valid table.
    fn valid_table_strategy() -> impl Strategy<Value = Vec<(char, char)>> {
        prop::collection::vec(
            ((0usize..20).prop_map(han), (0u8..26).prop_map(|i| (b'A' + i) as char)),
            0..12,
        )
        .prop_map(dedup_pairs)
    }

    /// Keys overlap the first table's target alphabet so composition chains.
    fn second_table_strategy() -> impl Strategy<Value = Vec<(char, char)>> {
        let key = prop_oneof![
            (0usize..20).prop_map(han),
            (0u8..13).prop_map(|i| (b'A' + i) as char),
        ];
        prop::collection::vec((key, (0u8..13).prop_map(|i| (b'N' + i) as char)), 0..12)
            .prop_map(dedup_pairs)
    }

    fn text_strategy() -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop_oneof![
                (0usize..20).prop_map(han),
                (0u8..26).prop_map(|i| (b'A' + i) as char),
                any::<char>(),
            ],
            0..60,
        )
        .prop_map(|chars| chars.into_iter().collect())
    }

    proptest! {
        #[test]
        fn apply_matches_per_char_oracle(pairs in valid_table_strategy(), text in text_strategy()) {
            let t = MappingTable::from_pairs("p", pairs.iter().copied()).unwrap();
            prop_assert_eq!(t.apply(&text), apply_oracle(&pairs, &text));
        }

        #[test]
        fn apply_is_idempotent_and_length_preserving(pairs in valid_table_strategy(), text in text_strategy()) {
            let t = MappingTable::from_pairs("p", pairs.iter().copied()).unwrap();
            let once = t.apply(&text);
            prop_assert_eq!(once.chars().count(), text.chars().count());
            prop_assert_eq!(t.apply(&once), once.clone());
        }

        #[test]
        fn compose_matches_sequential_apply(
            first in valid_table_strategy(),
            second in second_table_strategy(),
            text in text_strategy(),
        ) {
            let f = MappingTable::from_pairs("f", first.clone()).unwrap();
            let s = MappingTable::from_pairs("s", second.clone()).unwrap();
            // Not every pair composes to a valid table; the law applies when it does.
            if let Ok(c) = f.compose(&s) {
                prop_assert_eq!(c.apply(&text), s.apply(&f.apply(&text)));
            }
        }
    }
}
