//! C ABI over the cgedit core.
//!
//! Every fallible function returns a [`CgeditStatus`]; on failure the message
//! is available from [`cgedit_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Strings returned
//! to the caller are owned by it and released with [`cgedit_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cgedit::classifier::MultiHeadModel;
use cgedit::corpus::{self, Corpus, NGramIndex, TokenizerProfile, DEFAULT_ORDERS};
use cgedit::edit::{generate_candidates, SeedExample};
use cgedit::eval::{self, LabeledScores};
use cgedit::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgeditStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidInput = 5,
    NotFound = 6,
    Conflict = 7,
    Panic = 99,
}

pub struct CgeditCorpus(Corpus);
pub struct CgeditIndex(NGramIndex);
pub struct CgeditModel(MultiHeadModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CgeditStatus {
    match e {
        Error::Io { .. } => CgeditStatus::Io,
        Error::Parse { .. } => CgeditStatus::Parse,
        Error::UnknownSeed(_) | Error::UnknownFeature(_) | Error::UnknownUtterance(_) | Error::UnknownSession(_) => {
            CgeditStatus::NotFound
        }
        Error::LabelConflict(_)
        | Error::NotServed { .. }
        | Error::QuotaMet { .. }
        | Error::NothingToUndo
        | Error::UnfinishedSeeds(_) => CgeditStatus::Conflict,
        _ => CgeditStatus::InvalidInput,
    }
}

struct Fail(CgeditStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CgeditStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CgeditStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside cgedit".into());
            CgeditStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(CgeditStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CgeditStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(CgeditStatus::NullPointer, format!("`{name}` is null")))
}

fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    unsafe { p.as_mut() }.ok_or_else(|| Fail(CgeditStatus::NullPointer, format!("`{name}` is null")))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s).expect("no interior NUL").into_raw()
}

/// Message for the last failure on this thread, or NULL. Free with
/// `cgedit_string_free`.
#[no_mangle]
pub extern "C" fn cgedit_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn cgedit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Static version string; do not free.
#[no_mangle]
pub extern "C" fn cgedit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a JSONL utterance file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgedit_corpus_load(path: *const c_char, uncased: bool, out: *mut *mut CgeditCorpus) -> CgeditStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let profile = if uncased { TokenizerProfile::UNCASED } else { TokenizerProfile::CASED };
        let c = corpus::ingest_corpus(Path::new(path), None, profile)?;
        *out = Box::into_raw(Box::new(CgeditCorpus(c)));
        Ok(())
    })
}

/// # Safety
/// `corpus` must be NULL or a handle from `cgedit_corpus_load`.
#[no_mangle]
pub unsafe extern "C" fn cgedit_corpus_len(corpus: *const CgeditCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.len())
}

/// # Safety
/// `corpus` must be NULL or a handle from `cgedit_corpus_load`, freed once.
#[no_mangle]
pub unsafe extern "C" fn cgedit_corpus_free(corpus: *mut CgeditCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Builds the default 2/3/4-gram index.
///
/// # Safety
/// `corpus` must be a live corpus handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgedit_index_build(corpus: *const CgeditCorpus, out: *mut *mut CgeditIndex) -> CgeditStatus {
    guard(|| {
        let corpus = ref_arg(corpus, "corpus")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(CgeditIndex(NGramIndex::build(&corpus.0, &DEFAULT_ORDERS)?)));
        Ok(())
    })
}

/// # Safety
/// `dir` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgedit_index_load(dir: *const c_char, out: *mut *mut CgeditIndex) -> CgeditStatus {
    guard(|| {
        let dir = str_arg(dir, "dir")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(CgeditIndex(NGramIndex::load(Path::new(dir))?)));
        Ok(())
    })
}

/// # Safety
/// `index` must be a live index handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cgedit_index_save(index: *const CgeditIndex, dir: *const c_char) -> CgeditStatus {
    guard(|| {
        let index = ref_arg(index, "index")?;
        index.0.save(Path::new(str_arg(dir, "dir")?))?;
        Ok(())
    })
}

/// Corpus count of a space-separated n-gram.
///
/// # Safety
/// `index` must be a live index handle; `ngram` a NUL-terminated string;
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgedit_index_count(index: *const CgeditIndex, ngram: *const c_char, out: *mut u64) -> CgeditStatus {
    guard(|| {
        let index = ref_arg(index, "index")?;
        let toks: Vec<&str> = str_arg(ngram, "ngram")?.split_whitespace().collect();
        *out_arg(out, "out")? = index.0.count(&toks);
        Ok(())
    })
}

/// # Safety
/// `index` must be NULL or an index handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn cgedit_index_free(index: *mut CgeditIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Candidate edits for one seed as a JSON array, in shuffled order.
///
/// # Safety
/// `index` must be a live index handle; string arguments NUL-terminated;
/// `out_json` a valid pointer. Free the result with `cgedit_string_free`.
#[no_mangle]
pub unsafe extern "C" fn cgedit_generate(
    index: *const CgeditIndex,
    seed_id: *const c_char,
    feature_id: *const c_char,
    text: *const c_char,
    rng_seed: u64,
    out_json: *mut *mut c_char,
) -> CgeditStatus {
    guard(|| {
        let index = ref_arg(index, "index")?;
        let seed = SeedExample::new(
            str_arg(seed_id, "seed_id")?,
            str_arg(feature_id, "feature_id")?,
            str_arg(text, "text")?,
            index.0.tokenizer_profile(),
        );
        let out = out_arg(out_json, "out_json")?;
        let cands = generate_candidates(&seed, &index.0, rng_seed)?;
        *out = owned_string(serde_json::to_string(&cands).expect("serializable candidates"));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgedit_model_load(path: *const c_char, out: *mut *mut CgeditModel) -> CgeditStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(CgeditModel(MultiHeadModel::load(Path::new(path))?)));
        Ok(())
    })
}

/// Probability that `text` exhibits `feature_id`.
///
/// # Safety
/// `model` must be a live model handle; strings NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cgedit_model_score(
    model: *const CgeditModel,
    feature_id: *const c_char,
    text: *const c_char,
    out: *mut f64,
) -> CgeditStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let p = model.0.score(str_arg(feature_id, "feature_id")?, str_arg(text, "text")?)?;
        *out_arg(out, "out")? = p;
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a model handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn cgedit_model_free(model: *mut CgeditModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn labeled(scores: *const f64, labels: *const u8, n: usize) -> Result<LabeledScores, Fail> {
    if n > 0 && (scores.is_null() || labels.is_null()) {
        return Err(Fail(CgeditStatus::NullPointer, "`scores` or `labels` is null".into()));
    }
    let (s, l) = if n == 0 {
        (Vec::new(), Vec::new())
    } else {
        (
            std::slice::from_raw_parts(scores, n).to_vec(),
            std::slice::from_raw_parts(labels, n).to_vec(),
        )
    };
    Ok(LabeledScores::new(s, l)?)
}

/// # Safety
/// `scores` and `labels` must point to `n` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cgedit_roc_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> CgeditStatus {
    guard(|| {
        let v = eval::roc_auc(&labeled(scores, labels, n)?)?;
        *out_arg(out, "out")? = v;
        Ok(())
    })
}

/// # Safety
/// `scores` and `labels` must point to `n` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cgedit_average_precision(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
) -> CgeditStatus {
    guard(|| {
        let v = eval::average_precision(&labeled(scores, labels, n)?)?;
        *out_arg(out, "out")? = v;
        Ok(())
    })
}

/// Precision among the top `k`; missing ranks count as misses when `n < k`.
///
/// # Safety
/// `scores` and `labels` must point to `n` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cgedit_precision_at_k(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    k: usize,
    out: *mut f64,
) -> CgeditStatus {
    guard(|| {
        let v = eval::precision_at_k(&labeled(scores, labels, n)?, k)?;
        *out_arg(out, "out")? = v.value;
        Ok(())
    })
}
