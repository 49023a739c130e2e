//! Opcode extraction from GNU objdump listings.
//!
//! An instruction line has three tab-separated fields:
//!
//! ```text
//!  8048400:	55                   	push   %ebp
//! ```
//!
//! address, raw bytes, then the instruction text. The opcode token is the
//! first whitespace-delimited word of the instruction text, lowercased.
//! Prefixes printed as their own word (`lock`, `rep`) become the token.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use walkdir::WalkDir;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpcodeSequence {
    pub file_id: String,
    pub tokens: Vec<String>,
}

impl OpcodeSequence {
    /// Renders the tokens back into a minimal listing that parses to the same sequence.
    pub fn to_listing(&self) -> String {
        let mut out = format!("\n{}:     file format synthetic\n\n", self.file_id);
        out.push_str("Disassembly of section .text:\n\n");
        for (i, token) in self.tokens.iter().enumerate() {
            let _ = writeln!(out, "{:8x}:\t90\t{}", 0x1000 + i, token);
        }
        out
    }
}

/// Sorted, duplicate-free opcode universe defining feature columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MasterOpcodeList {
    opcodes: Vec<String>,
    index: HashMap<String, usize>,
}

impl MasterOpcodeList {
    /// Builds a list from arbitrary mnemonics; they are sorted and deduplicated.
    pub fn from_opcodes<I, S>(opcodes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut opcodes: Vec<String> = opcodes.into_iter().map(Into::into).collect();
        opcodes.sort();
        opcodes.dedup();
        let index = opcodes
            .iter()
            .enumerate()
            .map(|(i, op)| (op.clone(), i))
            .collect();
        MasterOpcodeList { opcodes, index }
    }

    pub fn opcodes(&self) -> &[String] {
        &self.opcodes
    }

    pub fn len(&self) -> usize {
        self.opcodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opcodes.is_empty()
    }

    pub fn position(&self, opcode: &str) -> Option<usize> {
        self.index.get(opcode).copied()
    }

    /// One mnemonic per line, in column order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for op in &self.opcodes {
            out.push_str(op);
            out.push('\n');
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut previous: Option<&str> = None;
        let mut opcodes = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let op = line.trim();
            if op.is_empty() || op.starts_with('#') {
                continue;
            }
            let line_no = i as u64 + 1;
            if !is_mnemonic(op) {
                return Err(Error::FormatViolation {
                    line: line_no,
                    message: format!("`{op}` is not a mnemonic"),
                });
            }
            if previous.is_some_and(|p| p >= op) {
                return Err(Error::FormatViolation {
                    line: line_no,
                    message: "master list must be strictly sorted".into(),
                });
            }
            previous = Some(op);
            opcodes.push(op.to_string());
        }
        Ok(Self::from_opcodes(opcodes))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector {
    pub file_id: String,
    pub counts: Vec<u64>,
}

fn is_mnemonic(token: &str) -> bool {
    let mut chars = token.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '.')
}

fn is_hex_address(field: &str) -> bool {
    !field.is_empty() && field.chars().all(|c| c.is_ascii_hexdigit())
}

fn is_byte_field(field: &str) -> bool {
    let trimmed = field.trim();
    !trimmed.is_empty()
        && trimmed
            .split(' ')
            .filter(|s| !s.is_empty())
            .all(|b| b.len() == 2 && b.chars().all(|c| c.is_ascii_hexdigit()))
}

/// Extracts the opcode token from one listing line, if it is an instruction line.
fn instruction_token(line: &str) -> Option<String> {
    let mut fields = line.splitn(3, '\t');
    let address = fields.next()?.trim();
    let bytes = fields.next()?;
    let text = fields.next()?;
    let address = address.strip_suffix(':')?;
    if !is_hex_address(address) || !is_byte_field(bytes) {
        return None;
    }
    let token = text.split_whitespace().next()?.to_lowercase();
    // `(bad)` and similar decoder placeholders are not opcodes
    is_mnemonic(&token).then_some(token)
}

pub fn parse_disassembly(listing_text: &str, file_id: &str) -> Result<OpcodeSequence> {
    let tokens: Vec<String> = listing_text.lines().filter_map(instruction_token).collect();
    if tokens.is_empty() {
        return Err(Error::NoInstructions {
            file_id: file_id.to_string(),
        });
    }
    Ok(OpcodeSequence {
        file_id: file_id.to_string(),
        tokens,
    })
}

pub fn build_master_list(sequences: &[OpcodeSequence]) -> Result<MasterOpcodeList> {
    if sequences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let all = sequences
        .iter()
        .flat_map(|s| s.tokens.iter().map(String::as_str));
    Ok(MasterOpcodeList::from_opcodes(all))
}

/// Counts master-list opcodes in `sequence`. The second value is the number
/// of tokens that had no column and were dropped.
pub fn histogram(sequence: &OpcodeSequence, master: &MasterOpcodeList) -> (FeatureVector, usize) {
    let mut counts = vec![0u64; master.len()];
    let mut dropped = 0;
    for token in &sequence.tokens {
        match master.position(token) {
            Some(j) => counts[j] += 1,
            None => dropped += 1,
        }
    }
    let vector = FeatureVector {
        file_id: sequence.file_id.clone(),
        counts,
    };
    (vector, dropped)
}

/// Result of scanning a listing directory.
#[derive(Debug)]
pub struct Extraction {
    pub sequences: Vec<OpcodeSequence>,
    /// Files that produced no instructions, excluded from the corpus.
    pub excluded: Vec<String>,
}

/// Identifier for a listing: its path relative to `root`, `/`-separated, without extension.
pub fn file_id_for(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path).with_extension("");
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Parses every `.asm` file below `root` in sorted path order.
pub fn extract_dir(root: &Path) -> Result<Extraction> {
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Io(e.into()))?;
        let path = entry.path();
        if entry.file_type().is_file() && path.extension().is_some_and(|e| e == "asm") {
            paths.push(path.to_path_buf());
        }
    }

    let parsed: Vec<(String, Result<OpcodeSequence>)> = paths
        .par_iter()
        .map(|path| {
            let id = file_id_for(root, path);
            let res = std::fs::read(path)
                .map_err(Error::from)
                .and_then(|bytes| parse_disassembly(&String::from_utf8_lossy(&bytes), &id));
            (id, res)
        })
        .collect();

    let mut sequences = Vec::new();
    let mut excluded = Vec::new();
    for (id, res) in parsed {
        match res {
            Ok(seq) => sequences.push(seq),
            Err(Error::NoInstructions { .. }) => {
                warn!("excluding `{id}`: no instructions (corrupt or packed)");
                excluded.push(id);
            }
            Err(e) => return Err(e),
        }
    }
    info!(
        "parsed {} listings, excluded {}",
        sequences.len(),
        excluded.len()
    );
    Ok(Extraction {
        sequences,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LISTING: &str = "\
/tmp/a.exe:     file format pei-i386


Disassembly of section .text:

08048400 <_start>:
 8048400:\t55                   \tpush   %ebp
 8048401:\t89 e5                \tmov    %esp,%ebp
 8048403:\tf0 0f b1 0a          \tlock cmpxchg %ecx,(%edx)
 8048407:\tc7 05 00 00 00 00 00 \tmovl   $0x0,0x0
 804840e:\t00 00 00
 8048411:\tff                   \t(bad)
 8048412:\tC3                   \tRET
";

    #[test]
    fn objdump_line_yields_mnemonic() {
        let seq = parse_disassembly(" 8048400:\t55\tpush   %ebp", "a").unwrap();
        assert_eq!(seq.tokens, vec!["push"]);
    }

    #[test]
    fn full_listing() {
        let seq = parse_disassembly(LISTING, "a").unwrap();
        assert_eq!(seq.tokens, vec!["push", "mov", "lock", "movl", "ret"]);
    }

    #[test]
    fn empty_listing_is_rejected() {
        assert!(matches!(
            parse_disassembly("", "x"),
            Err(Error::NoInstructions { file_id }) if file_id == "x"
        ));
        let headers_only = "a.exe:     file format elf32-i386\n\nDisassembly of section .text:\n";
        assert!(parse_disassembly(headers_only, "x").is_err());
    }

    #[test]
    fn mnemonics_are_lowercased() {
        let text = "  10:\t89 e5\tmov %esp,%ebp\n  12:\t89 e5\tMOV %esp,%ebp\n";
        assert_eq!(parse_disassembly(text, "a").unwrap().tokens, vec!["mov", "mov"]);
    }

    fn seq(tokens: &[&str]) -> OpcodeSequence {
        OpcodeSequence {
            file_id: tokens.join("-"),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn master_list_is_sorted_union() {
        let master = build_master_list(&[seq(&["push", "mov"]), seq(&["mov", "call"])]).unwrap();
        assert_eq!(master.opcodes(), ["call", "mov", "push"]);
        let single = build_master_list(&[seq(&["add", "add"])]).unwrap();
        assert_eq!(single.opcodes(), ["add"]);
        assert!(matches!(build_master_list(&[]), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn histogram_counts_and_drops() {
        let master = MasterOpcodeList::from_opcodes(["call", "mov", "push"]);
        let (v, dropped) = histogram(&seq(&["mov", "mov", "push"]), &master);
        assert_eq!(v.counts, vec![0, 2, 1]);
        assert_eq!(dropped, 0);

        let master = MasterOpcodeList::from_opcodes(["mov"]);
        let (v, dropped) = histogram(&seq(&["xyz"]), &master);
        assert_eq!(v.counts, vec![0]);
        assert_eq!(dropped, 1);
        let (v, _) = histogram(&seq(&["mov"]), &master);
        assert_eq!(v.counts, vec![1]);
    }

    #[test]
    fn master_text_round_trip_and_validation() {
        let master = MasterOpcodeList::from_opcodes(["push", "add", "mov"]);
        assert_eq!(master.to_text(), "add\nmov\npush\n");
        assert_eq!(MasterOpcodeList::parse_text(&master.to_text()).unwrap(), master);
        let err = MasterOpcodeList::parse_text("mov\nadd\n").unwrap_err();
        assert!(matches!(err, Error::FormatViolation { line: 2, .. }));
    }

    fn token_strategy() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9.]{0,6}"
    }

    fn corpus_strategy() -> impl Strategy<Value = Vec<Vec<String>>> {
        prop::collection::vec(prop::collection::vec(token_strategy(), 1..20), 1..6)
    }

    proptest! {
        #[test]
        fn reparse_of_rendered_listing_is_identity(tokens in prop::collection::vec(token_strategy(), 1..40)) {
            let original = OpcodeSequence { file_id: "f".into(), tokens };
            let reparsed = parse_disassembly(&original.to_listing(), "f").unwrap();
            prop_assert_eq!(reparsed, original);
        }

        #[test]
        fn corpus_members_drop_nothing_and_order_is_irrelevant(corpus in corpus_strategy()) {
            let seqs: Vec<OpcodeSequence> = corpus
                .iter()
                .enumerate()
                .map(|(i, t)| OpcodeSequence { file_id: i.to_string(), tokens: t.clone() })
                .collect();
            let master = build_master_list(&seqs).unwrap();
            for s in &seqs {
                let (v, dropped) = histogram(s, &master);
                prop_assert_eq!(dropped, 0);
                prop_assert_eq!(v.counts.iter().sum::<u64>() as usize, s.tokens.len());
            }
            let mut reversed = seqs.clone();
            reversed.reverse();
            prop_assert_eq!(build_master_list(&reversed).unwrap(), master.clone());
            prop_assert!(master.opcodes().windows(2).all(|w| w[0] < w[1]));
        }
    }
}
