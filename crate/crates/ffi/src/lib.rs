//! C ABI over the `uwacomm` codecs, interleavers and channel helpers.
//!
//! Every fallible function returns a [`UwaStatus`]; results are written
//! through out-pointers only on `UWA_STATUS_OK`. Handles are opaque and
//! must be released with their `_free` function. Panics never cross the
//! boundary; they surface as `UWA_STATUS_PANIC`.

use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, UnwindSafe};
use std::ptr;

use uwacomm::channel::{self, ChannelConfig, ChannelError};
use uwacomm::fec::{Code, FecError};
use uwacomm::interleave::{self, InterleaveError, InterleaverSpec};
use uwacomm::phy::{self, PhyError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UwaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownName = 3,
    BufferTooSmall = 4,
    DecodeFailure = 5,
    Panic = 6,
}

impl From<FecError> for UwaStatus {
    fn from(e: FecError) -> Self {
        match e {
            FecError::DecodeFailure => UwaStatus::DecodeFailure,
            FecError::UnknownCode(_) => UwaStatus::UnknownName,
            _ => UwaStatus::InvalidArgument,
        }
    }
}

impl From<InterleaveError> for UwaStatus {
    fn from(e: InterleaveError) -> Self {
        match e {
            InterleaveError::UnknownName(_) => UwaStatus::UnknownName,
            _ => UwaStatus::InvalidArgument,
        }
    }
}

impl From<ChannelError> for UwaStatus {
    fn from(_: ChannelError) -> Self {
        UwaStatus::InvalidArgument
    }
}

impl From<PhyError> for UwaStatus {
    fn from(_: PhyError) -> Self {
        UwaStatus::InvalidArgument
    }
}

/// Static description of a status code. Never null.
#[no_mangle]
pub extern "C" fn uwa_status_str(status: UwaStatus) -> *const c_char {
    let s: &'static CStr = match status {
        UwaStatus::Ok => c"ok",
        UwaStatus::NullPointer => c"null pointer argument",
        UwaStatus::InvalidArgument => c"invalid argument",
        UwaStatus::UnknownName => c"unknown code or interleaver name",
        UwaStatus::BufferTooSmall => c"output buffer too small",
        UwaStatus::DecodeFailure => c"uncorrectable codeword",
        UwaStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

fn guard<F: FnOnce() -> Result<(), UwaStatus> + UnwindSafe>(f: F) -> UwaStatus {
    match catch_unwind(f) {
        Ok(Ok(())) => UwaStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => UwaStatus::Panic,
    }
}

unsafe fn name_arg<'a>(name: *const c_char) -> Result<&'a str, UwaStatus> {
    if name.is_null() {
        return Err(UwaStatus::NullPointer);
    }
    CStr::from_ptr(name)
        .to_str()
        .map_err(|_| UwaStatus::InvalidArgument)
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize) -> Result<&'a [T], UwaStatus> {
    match (p.is_null(), len) {
        (_, 0) => Ok(&[]),
        (true, _) => Err(UwaStatus::NullPointer),
        (false, _) => Ok(std::slice::from_raw_parts(p, len)),
    }
}

unsafe fn write_out<T: Copy>(src: &[T], out: *mut T, out_len: usize) -> Result<(), UwaStatus> {
    if src.len() > out_len {
        return Err(UwaStatus::BufferTooSmall);
    }
    if !src.is_empty() {
        if out.is_null() {
            return Err(UwaStatus::NullPointer);
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    }
    Ok(())
}

unsafe fn set<T>(out: *mut T, value: T) -> Result<(), UwaStatus> {
    if out.is_null() {
        return Err(UwaStatus::NullPointer);
    }
    out.write(value);
    Ok(())
}

/// Opaque RS or BCH code.
pub struct UwaCode(Code);

/// Opaque interleaver.
pub struct UwaInterleaver(InterleaverSpec);

/// Creates a code from a name such as `"rs-15-11"` or `"bch-15-7"`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uwa_code_new(name: *const c_char, out: *mut *mut UwaCode) -> UwaStatus {
    guard(|| {
        if out.is_null() {
            return Err(UwaStatus::NullPointer);
        }
        let code = Code::from_name(name_arg(name)?)?;
        out.write(Box::into_raw(Box::new(UwaCode(code))));
        Ok(())
    })
}

/// Releases a code. Null is ignored.
///
/// # Safety
/// `code` must come from [`uwa_code_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn uwa_code_free(code: *mut UwaCode) {
    if !code.is_null() {
        drop(Box::from_raw(code));
    }
}

/// Writes the codeword length, data length and designed correction
/// capability.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn uwa_code_params(
    code: *const UwaCode,
    n: *mut usize,
    k: *mut usize,
    t: *mut usize,
) -> UwaStatus {
    guard(|| {
        let code = &code.as_ref().ok_or(UwaStatus::NullPointer)?.0;
        if n.is_null() || k.is_null() || t.is_null() {
            return Err(UwaStatus::NullPointer);
        }
        set(n, code.n())?;
        set(k, code.k())?;
        set(t, code.t())
    })
}

/// Systematic encoding of `k` symbols into `n`.
///
/// # Safety
/// `data` must hold `data_len` symbols and `out` room for `out_len`.
#[no_mangle]
pub unsafe extern "C" fn uwa_code_encode(
    code: *const UwaCode,
    data: *const u16,
    data_len: usize,
    out: *mut u16,
    out_len: usize,
) -> UwaStatus {
    guard(|| {
        let code = &code.as_ref().ok_or(UwaStatus::NullPointer)?.0;
        let word = code.encode(slice_arg(data, data_len)?)?;
        write_out(&word, out, out_len)
    })
}

/// Errors-and-erasures decoding of one `n`-symbol word into `k` data
/// symbols. `corrected` may be null.
///
/// # Safety
/// Buffers must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn uwa_code_decode(
    code: *const UwaCode,
    received: *const u16,
    received_len: usize,
    erasures: *const usize,
    erasures_len: usize,
    out: *mut u16,
    out_len: usize,
    corrected: *mut usize,
) -> UwaStatus {
    guard(|| {
        let code = &code.as_ref().ok_or(UwaStatus::NullPointer)?.0;
        let (data, fixed) = code.decode(
            slice_arg(received, received_len)?,
            slice_arg(erasures, erasures_len)?,
        )?;
        write_out(&data, out, out_len)?;
        if !corrected.is_null() {
            corrected.write(fixed);
        }
        Ok(())
    })
}

/// Binary BCH(15, k) generator polynomial for correction capability `t`,
/// bit `i` holding the coefficient of `x^i`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn uwa_bch_generator(t: usize, out: *mut u64) -> UwaStatus {
    guard(|| {
        let g = uwacomm::fec::bch_generator(t)?;
        set(out, g)
    })
}

/// Creates an interleaver from `"none"`, `"block:RxC"`, `"matrix:RxC"` or
/// `"conv:B,M"`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uwa_interleaver_new(
    spec: *const c_char,
    out: *mut *mut UwaInterleaver,
) -> UwaStatus {
    guard(|| {
        if out.is_null() {
            return Err(UwaStatus::NullPointer);
        }
        let spec: InterleaverSpec = name_arg(spec)?.parse()?;
        spec.validate()?;
        out.write(Box::into_raw(Box::new(UwaInterleaver(spec))));
        Ok(())
    })
}

/// Releases an interleaver. Null is ignored.
///
/// # Safety
/// `il` must come from [`uwa_interleaver_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn uwa_interleaver_free(il: *mut UwaInterleaver) {
    if !il.is_null() {
        drop(Box::from_raw(il));
    }
}

/// Block length in symbols, or 0 for streaming interleavers.
///
/// # Safety
/// `il` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn uwa_interleaver_block_len(il: *const UwaInterleaver) -> usize {
    il.as_ref().and_then(|il| il.0.block_len()).unwrap_or(0)
}

/// Symbols added by interleaving (convolutional padding).
///
/// # Safety
/// `il` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn uwa_interleaver_delay(il: *const UwaInterleaver) -> usize {
    il.as_ref().map_or(0, |il| il.0.delay())
}

/// Interleaves `len` symbols; the output holds `len + delay` symbols.
///
/// # Safety
/// Buffers must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn uwa_interleave(
    il: *const UwaInterleaver,
    input: *const u16,
    len: usize,
    out: *mut u16,
    out_len: usize,
) -> UwaStatus {
    guard(|| {
        let spec = &il.as_ref().ok_or(UwaStatus::NullPointer)?.0;
        let v = interleave::interleave(spec, slice_arg(input, len)?)?;
        write_out(&v, out, out_len)
    })
}

/// Inverse of [`uwa_interleave`]; the output holds `len - delay` symbols.
///
/// # Safety
/// Buffers must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn uwa_deinterleave(
    il: *const UwaInterleaver,
    input: *const u16,
    len: usize,
    out: *mut u16,
    out_len: usize,
) -> UwaStatus {
    guard(|| {
        let spec = &il.as_ref().ok_or(UwaStatus::NullPointer)?.0;
        let v = interleave::deinterleave(spec, slice_arg(input, len)?)?;
        write_out(&v, out, out_len)
    })
}

/// Thorp absorption in dB/km at `f_khz`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn uwa_absorption_db_per_km(f_khz: f64, out: *mut f64) -> UwaStatus {
    guard(|| set(out, channel::absorption_db_per_km(f_khz)?))
}

/// Path loss in dB over `distance_m` at `f_khz` with spreading exponent
/// `k` and a 1 m reference distance.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn uwa_path_loss_db(
    distance_m: f64,
    f_khz: f64,
    k: f64,
    out: *mut f64,
) -> UwaStatus {
    guard(|| {
        let cfg = ChannelConfig {
            spreading_exponent: k,
            ..ChannelConfig::default()
        };
        set(out, channel::path_loss_db(distance_m, f_khz, &cfg)?)
    })
}

/// Writes the `2^m - 1` chips (+1/-1) of an m-sequence. `taps == 0`
/// selects the default primitive polynomial of degree `m`.
///
/// # Safety
/// `out` must have room for `out_len` chips.
#[no_mangle]
pub unsafe extern "C" fn uwa_msequence(
    m: u32,
    taps: u32,
    seed: u32,
    out: *mut i8,
    out_len: usize,
) -> UwaStatus {
    guard(|| {
        let pn = if taps == 0 {
            phy::default_msequence(m, seed)?
        } else {
            phy::msequence(m, taps, seed)?
        };
        write_out(pn.chips(), out, out_len)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_strings_are_distinct() {
        let all = [
            UwaStatus::Ok,
            UwaStatus::NullPointer,
            UwaStatus::InvalidArgument,
            UwaStatus::UnknownName,
            UwaStatus::BufferTooSmall,
            UwaStatus::DecodeFailure,
            UwaStatus::Panic,
        ];
        let mut seen: Vec<String> = all
            .iter()
            .map(|&s| {
                unsafe { CStr::from_ptr(uwa_status_str(s)) }
                    .to_str()
                    .unwrap()
                    .to_owned()
            })
            .collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), all.len());
    }

    #[test]
    fn guard_catches_panics() {
        assert_eq!(guard(|| panic!("boom")), UwaStatus::Panic);
    }

    #[test]
    fn short_output_is_rejected() {
        let mut buf = [0u16; 2];
        let r = unsafe { write_out(&[1u16, 2, 3], buf.as_mut_ptr(), buf.len()) };
        assert_eq!(r, Err(UwaStatus::BufferTooSmall));
    }
}
