//! C interface to `blocker-core`.
//!
//! Objects cross the boundary as opaque handles created by a
//! `*_new`/`*_from_json`/`*_train` call and released with the matching
//! `*_free`. Every fallible function returns a [`BlockerStatus`]; on error
//! the message is kept per thread and read with
//! [`blocker_last_error_message`]. Bit strings are arrays with one byte per
//! bit, any nonzero byte meaning 1.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use blocker_core::locknet::{functional_match, obfuscate, sample_multiplier, LutNetlist, ObfuscatedBitstream};
use blocker_core::pufsim::{collect_crps, train_model, ArbiterPuf, Challenge, DeviceId, PufModel};
use blocker_core::quantizer::{regenerate_from_readings, HelperData};
use blocker_core::sigproc::FeatureVector;
use blocker_core::{Bits, Error};

/// Status codes. Zero is success; errors are negative and stable.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockerStatus {
    Ok = 0,
    NullArgument = -1,
    InvalidUtf8 = -2,
    Config = -3,
    Degenerate = -4,
    Numeric = -5,
    SizeMismatch = -6,
    Enrollment = -7,
    Protocol = -8,
    UnknownDevice = -9,
    NotEnrolled = -10,
    Parse = -11,
    Io = -12,
    BufferTooSmall = -13,
    Panic = -14,
}

pub struct BlockerPuf(ArbiterPuf);
pub struct BlockerModel(PufModel);
pub struct BlockerHelper(HelperData);
pub struct BlockerNetlist(LutNetlist);
pub struct BlockerBitstream(ObfuscatedBitstream);

struct Failure {
    status: BlockerStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) => BlockerStatus::Config,
            Error::Degenerate(_) => BlockerStatus::Degenerate,
            Error::Numeric(_) => BlockerStatus::Numeric,
            Error::SizeMismatch { .. } => BlockerStatus::SizeMismatch,
            Error::Enrollment(_) => BlockerStatus::Enrollment,
            Error::Protocol(_) => BlockerStatus::Protocol,
            Error::UnknownDevice(_) => BlockerStatus::UnknownDevice,
            Error::NotEnrolled(_) => BlockerStatus::NotEnrolled,
            Error::Parse(_) | Error::Json(_) | Error::Csv(_) => BlockerStatus::Parse,
            Error::Io { .. } => BlockerStatus::Io,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

fn failure(status: BlockerStatus, message: impl Into<String>) -> Failure {
    Failure {
        status,
        message: message.into(),
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).expect("NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BlockerStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BlockerStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(&e.message);
            e.status
        }
        Err(_) => {
            set_last_error("internal panic");
            BlockerStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(failure(BlockerStatus::NullArgument, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    non_null(p, what)?;
    Ok(&*p)
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    non_null(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| failure(BlockerStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn bits_in(p: *const u8, len: usize, what: &str) -> Result<Bits, Failure> {
    if len == 0 {
        return Ok(Bits::new());
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len).iter().map(|&b| b != 0).collect())
}

unsafe fn bits_out(bits: &Bits, out: *mut u8, capacity: usize, out_len: *mut usize) -> Result<(), Failure> {
    non_null(out_len, "out_len")?;
    *out_len = bits.len();
    if bits.len() > capacity {
        return Err(failure(
            BlockerStatus::BufferTooSmall,
            format!("{} bits do not fit in {capacity}", bits.len()),
        ));
    }
    if !bits.is_empty() {
        non_null(out, "out")?;
        let dst = std::slice::from_raw_parts_mut(out, bits.len());
        for (d, b) in dst.iter_mut().zip(bits.iter()) {
            *d = u8::from(b);
        }
    }
    Ok(())
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    non_null(out, "out")?;
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn blocker_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the calling thread's last error message, without
/// the terminating NUL; 0 if there is none.
#[no_mangle]
pub extern "C" fn blocker_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |m| m.as_bytes().len()))
}

/// Copies the last error message, NUL-terminated, into `buf`.
///
/// # Safety
/// `buf` must point to `capacity` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn blocker_last_error_message(buf: *mut c_char, capacity: usize) -> BlockerStatus {
    if buf.is_null() {
        return BlockerStatus::NullArgument;
    }
    LAST_ERROR.with(|e| {
        let empty = CString::default();
        let borrowed = e.borrow();
        let msg = borrowed.as_ref().unwrap_or(&empty).as_bytes_with_nul();
        if msg.len() > capacity {
            return BlockerStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, msg.len());
        BlockerStatus::Ok
    })
}

/// Creates a simulated arbiter PUF.
///
/// # Safety
/// `device_id` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blocker_puf_new(
    device_id: *const c_char,
    n_stages: usize,
    noise_sigma: f64,
    seed: u64,
    out: *mut *mut BlockerPuf,
) -> BlockerStatus {
    guard(|| {
        let id = text(device_id, "device_id")?;
        let puf = ArbiterPuf::new(DeviceId::from(id), n_stages, noise_sigma, seed)?;
        store(out, BlockerPuf(puf))
    })
}

/// # Safety
/// `puf` must come from [`blocker_puf_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn blocker_puf_free(puf: *mut BlockerPuf) {
    release(puf);
}

/// Evaluates one challenge with noise fixed by `seed`.
///
/// # Safety
/// `challenge` must hold `n_stages` bytes; `response` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blocker_puf_eval(
    puf: *const BlockerPuf,
    challenge: *const u8,
    n_stages: usize,
    seed: u64,
    response: *mut u8,
) -> BlockerStatus {
    guard(|| {
        let puf = handle(puf, "puf")?;
        let c = Challenge(bits_in(challenge, n_stages, "challenge")?);
        non_null(response, "response")?;
        *response = u8::from(puf.0.eval(&c, seed)?);
        Ok(())
    })
}

/// Collects `n_crps` noiseless CRPs from `puf` and trains a model.
///
/// # Safety
/// `puf` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blocker_model_train(
    puf: *const BlockerPuf,
    n_crps: usize,
    seed: u64,
    out: *mut *mut BlockerModel,
) -> BlockerStatus {
    guard(|| {
        let puf = handle(puf, "puf")?;
        let model = train_model(&collect_crps(&puf.0, n_crps, seed)?)?;
        store(out, BlockerModel(model))
    })
}

/// Held-out accuracy of a trained model (training accuracy when no
/// CRPs were held out).
///
/// # Safety
/// `model` must be a live handle; `accuracy` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blocker_model_accuracy(model: *const BlockerModel, accuracy: *mut f64) -> BlockerStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        non_null(accuracy, "accuracy")?;
        *accuracy = m.holdout_accuracy.unwrap_or(m.train_accuracy);
        Ok(())
    })
}

/// # Safety
/// `challenge` must hold `n_stages` bytes; `response` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blocker_model_predict(
    model: *const BlockerModel,
    challenge: *const u8,
    n_stages: usize,
    response: *mut u8,
) -> BlockerStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let c = Challenge(bits_in(challenge, n_stages, "challenge")?);
        non_null(response, "response")?;
        *response = u8::from(m.0.predict(&c)?);
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn blocker_model_free(model: *mut BlockerModel) {
    release(model);
}

/// Parses and validates helper data.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blocker_helper_from_json(json: *const c_char, out: *mut *mut BlockerHelper) -> BlockerStatus {
    guard(|| {
        let helper = HelperData::from_json(text(json, "json")?)?;
        store(out, BlockerHelper(helper))
    })
}

/// # Safety
/// `helper` must be a live handle; `key_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blocker_helper_key_len(helper: *const BlockerHelper, key_len: *mut usize) -> BlockerStatus {
    guard(|| {
        let h = handle(helper, "helper")?;
        non_null(key_len, "key_len")?;
        *key_len = h.0.key_len();
        Ok(())
    })
}

/// Regenerates a key from `readings` feature vectors of length `dim`,
/// stored row-major in `features`. One reading, or as many as the
/// helper's ECC block length.
///
/// # Safety
/// `features` must hold `readings * dim` values; `key` must hold
/// `capacity` bytes; `key_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blocker_regenerate_key(
    helper: *const BlockerHelper,
    features: *const f64,
    dim: usize,
    readings: usize,
    key: *mut u8,
    capacity: usize,
    key_len: *mut usize,
) -> BlockerStatus {
    guard(|| {
        let h = handle(helper, "helper")?;
        non_null(features, "features")?;
        let total = readings
            .checked_mul(dim)
            .ok_or_else(|| failure(BlockerStatus::SizeMismatch, "readings * dim overflows"))?;
        let values = std::slice::from_raw_parts(features, total);
        let samples: Vec<FeatureVector> = values
            .chunks(dim.max(1))
            .map(|row| FeatureVector::new(row.to_vec(), ""))
            .collect();
        let regenerated = regenerate_from_readings(&samples, &h.0)?;
        bits_out(regenerated.bits(), key, capacity, key_len)
    })
}

/// # Safety
/// `helper` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn blocker_helper_free(helper: *mut BlockerHelper) {
    release(helper);
}

/// The bundled 4x4-bit multiplier netlist.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blocker_netlist_sample_multiplier(out: *mut *mut BlockerNetlist) -> BlockerStatus {
    guard(|| store(out, BlockerNetlist(sample_multiplier())))
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blocker_netlist_from_json(json: *const c_char, out: *mut *mut BlockerNetlist) -> BlockerStatus {
    guard(|| {
        let net = LutNetlist::from_json(text(json, "json")?)?;
        store(out, BlockerNetlist(net))
    })
}

/// Evaluates an unlocked netlist.
///
/// # Safety
/// `inputs` must hold `n_inputs` bytes and `outputs` `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn blocker_netlist_evaluate(
    netlist: *const BlockerNetlist,
    inputs: *const u8,
    n_inputs: usize,
    outputs: *mut u8,
    capacity: usize,
    n_outputs: *mut usize,
) -> BlockerStatus {
    guard(|| {
        let net = handle(netlist, "netlist")?;
        let result = net.0.evaluate(&Bits::new(), &bits_in(inputs, n_inputs, "inputs")?)?;
        bits_out(&result, outputs, capacity, n_outputs)
    })
}

/// Locks `netlist` under `key`.
///
/// # Safety
/// `key` must hold `key_len` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blocker_obfuscate(
    netlist: *const BlockerNetlist,
    key: *const u8,
    key_len: usize,
    seed: u64,
    out: *mut *mut BlockerBitstream,
) -> BlockerStatus {
    guard(|| {
        let net = handle(netlist, "netlist")?;
        let bitstream = obfuscate(&net.0, &bits_in(key, key_len, "key")?, seed)?;
        store(out, BlockerBitstream(bitstream))
    })
}

/// # Safety
/// `netlist` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn blocker_netlist_free(netlist: *mut BlockerNetlist) {
    release(netlist);
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blocker_bitstream_from_json(
    json: *const c_char,
    out: *mut *mut BlockerBitstream,
) -> BlockerStatus {
    guard(|| {
        let bs = ObfuscatedBitstream::from_json(text(json, "json")?)?;
        store(out, BlockerBitstream(bs))
    })
}

/// # Safety
/// `bitstream` must be a live handle; `key_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blocker_bitstream_key_len(
    bitstream: *const BlockerBitstream,
    key_len: *mut usize,
) -> BlockerStatus {
    guard(|| {
        let bs = handle(bitstream, "bitstream")?;
        non_null(key_len, "key_len")?;
        *key_len = bs.0.key_len;
        Ok(())
    })
}

/// Evaluates a locked bitstream under `key`.
///
/// # Safety
/// `key`, `inputs` and `outputs` must hold `key_len`, `n_inputs` and
/// `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn blocker_bitstream_evaluate(
    bitstream: *const BlockerBitstream,
    key: *const u8,
    key_len: usize,
    inputs: *const u8,
    n_inputs: usize,
    outputs: *mut u8,
    capacity: usize,
    n_outputs: *mut usize,
) -> BlockerStatus {
    guard(|| {
        let bs = handle(bitstream, "bitstream")?;
        let result = bs
            .0
            .evaluate(&bits_in(key, key_len, "key")?, &bits_in(inputs, n_inputs, "inputs")?)?;
        bits_out(&result, outputs, capacity, n_outputs)
    })
}

/// Fraction of input vectors on which the keyed bitstream agrees with
/// `reference` (exhaustive up to 20 inputs).
///
/// # Safety
/// `key` must hold `key_len` bytes; `fraction` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blocker_functional_match(
    bitstream: *const BlockerBitstream,
    key: *const u8,
    key_len: usize,
    reference: *const BlockerNetlist,
    fraction: *mut f64,
) -> BlockerStatus {
    guard(|| {
        let bs = handle(bitstream, "bitstream")?;
        let reference = handle(reference, "reference")?;
        non_null(fraction, "fraction")?;
        *fraction = functional_match(&bs.0, &bits_in(key, key_len, "key")?, &reference.0)?;
        Ok(())
    })
}

/// # Safety
/// `bitstream` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn blocker_bitstream_free(bitstream: *mut BlockerBitstream) {
    release(bitstream);
}
