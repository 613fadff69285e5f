//! RM-1, the total reference machine.
//!
//! Programs are read MSB-first as a sequence of two-bit opcodes:
//!
//! | code | opcode | operands                 | effect                                            |
//! |------|--------|--------------------------|---------------------------------------------------|
//! | `00` | EMIT0  |                          | append `0`                                        |
//! | `01` | EMIT1  |                          | append `1`                                        |
//! | `10` | COPY   | `gamma(L)`, `gamma(Q)`   | append condition bits `[Q-1, Q-1+L)`              |
//! | `11` | REPEAT | `gamma(L)`, `gamma(R)`   | append `R` copies of the last `L` output bits      |
//!
//! Running out of program bits anywhere (between opcodes, inside an opcode or
//! inside an operand) halts normally with the output produced so far. An
//! out-of-range COPY or REPEAT, or exceeding either budget, is a failure and
//! produces no string. Every program therefore yields at most one output.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_OUTPUT_BITS: usize = 4096;
pub const DEFAULT_MAX_OPCODES: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MachineBudget {
    #[serde(rename = "out")]
    pub max_output_bits: usize,
    #[serde(rename = "ops")]
    pub max_opcodes: usize,
}

impl Default for MachineBudget {
    fn default() -> Self {
        Self {
            max_output_bits: DEFAULT_MAX_OUTPUT_BITS,
            max_opcodes: DEFAULT_MAX_OPCODES,
        }
    }
}

impl MachineBudget {
    pub fn new(max_output_bits: usize, max_opcodes: usize) -> Result<Self> {
        let b = Self {
            max_output_bits,
            max_opcodes,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_output_bits == 0 || self.max_opcodes == 0 {
            return Err(Error::InvalidParameter(
                "machine budgets must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum Fault {
    #[error("COPY reads past the end of the condition")]
    CopyOutOfRange,
    #[error("REPEAT asks for more bits than have been emitted")]
    RepeatOutOfRange,
    #[error("gamma operand does not fit in 64 bits")]
    OperandOverflow,
    #[error("output budget exceeded")]
    OutputBudget,
    #[error("opcode budget exceeded")]
    OpcodeBudget,
}

/// Runs program `p` on condition `y`. Always terminates.
pub fn run_machine(p: &BitString, y: &BitString, budget: MachineBudget) -> Result<BitString, Fault> {
    let prog = p.bits();
    let cond = y.bits();
    let mut out: Vec<bool> = Vec::new();
    let mut pos = 0usize;
    let mut opcodes = 0usize;

    // Ok(None) means the program ended inside the operand.
    let read_gamma = |pos: &mut usize| -> Result<Option<u64>, Fault> {
        let mut zeros = 0usize;
        while *pos < prog.len() && !prog[*pos] {
            zeros += 1;
            *pos += 1;
        }
        if *pos + zeros >= prog.len() {
            return Ok(None);
        }
        if zeros > 63 {
            return Err(Fault::OperandOverflow);
        }
        let mut v = 0u64;
        for &bit in &prog[*pos..=*pos + zeros] {
            v = (v << 1) | bit as u64;
        }
        *pos += zeros + 1;
        Ok(Some(v))
    };

    while pos + 2 <= prog.len() {
        opcodes += 1;
        if opcodes > budget.max_opcodes {
            return Err(Fault::OpcodeBudget);
        }
        let op = (prog[pos], prog[pos + 1]);
        pos += 2;
        match op {
            (false, bit) => {
                if out.len() + 1 > budget.max_output_bits {
                    return Err(Fault::OutputBudget);
                }
                out.push(bit);
            }
            (true, is_repeat) => {
                let Some(len) = read_gamma(&mut pos)? else { break };
                let Some(arg) = read_gamma(&mut pos)? else { break };
                if is_repeat {
                    if (out.len() as u64) < len {
                        return Err(Fault::RepeatOutOfRange);
                    }
                    let total = len.saturating_mul(arg).saturating_add(out.len() as u64);
                    if total > budget.max_output_bits as u64 {
                        return Err(Fault::OutputBudget);
                    }
                    let chunk = out[out.len() - len as usize..].to_vec();
                    for _ in 0..arg {
                        out.extend_from_slice(&chunk);
                    }
                } else {
                    let start = arg - 1;
                    let end = start.saturating_add(len);
                    if end > cond.len() as u64 {
                        return Err(Fault::CopyOutOfRange);
                    }
                    if out.len() as u64 + len > budget.max_output_bits as u64 {
                        return Err(Fault::OutputBudget);
                    }
                    out.extend_from_slice(&cond[start as usize..end as usize]);
                }
            }
        }
    }
    Ok(BitString::from_bits(out))
}

/// Packed condition for the enumeration hot path (at most 64 bits).
#[derive(Clone, Copy, Debug)]
pub(crate) struct PackedCondition {
    pub bits: u64,
    pub len: u32,
}

impl PackedCondition {
    pub fn from_bitstring(y: &BitString) -> Option<Self> {
        Some(Self {
            bits: y.to_value()?,
            len: y.len() as u32,
        })
    }
}

/// Executes a packed program (`plen <= 64` bits, MSB-first in the low `plen`
/// bits of `prog`) and returns the output as `(value, len)` if it halts with an
/// output of exactly `target_len <= 64` bits. Equivalent to [`run_machine`]
/// followed by a length filter.
#[inline]
pub(crate) fn run_packed_for_target(
    prog: u64,
    plen: u32,
    cond: PackedCondition,
    budget: MachineBudget,
    target_len: u32,
) -> Option<u64> {
    debug_assert!(plen <= 64 && target_len <= 64);
    let bit_at = |i: u32| (prog >> (plen - 1 - i)) & 1;
    // Output never shrinks: once past `cap` the program cannot produce a target.
    let cap = target_len as u64;
    let max_out = budget.max_output_bits as u64;
    let mut out: u64 = 0;
    let mut olen: u64 = 0;
    let mut pos: u32 = 0;
    let mut opcodes = 0usize;

    let read_gamma = |pos: &mut u32| -> Result<Option<u64>, ()> {
        let mut zeros = 0u32;
        while *pos < plen && bit_at(*pos) == 0 {
            zeros += 1;
            *pos += 1;
        }
        if *pos + zeros >= plen {
            return Ok(None);
        }
        if zeros > 63 {
            return Err(());
        }
        let width = zeros + 1;
        let v = (prog >> (plen - *pos - width)) & mask(width);
        *pos += width;
        Ok(Some(v))
    };

    while pos + 2 <= plen {
        opcodes += 1;
        if opcodes > budget.max_opcodes {
            return None;
        }
        let op = (prog >> (plen - pos - 2)) & 0b11;
        pos += 2;
        match op {
            0b00 | 0b01 => {
                olen += 1;
                if olen > max_out || olen > cap {
                    return None;
                }
                out = (out << 1) | (op & 1);
            }
            _ => {
                let len = match read_gamma(&mut pos) {
                    Ok(Some(v)) => v,
                    Ok(None) => break,
                    Err(()) => return None,
                };
                let arg = match read_gamma(&mut pos) {
                    Ok(Some(v)) => v,
                    Ok(None) => break,
                    Err(()) => return None,
                };
                if op == 0b11 {
                    if olen < len {
                        return None;
                    }
                    let total = len.saturating_mul(arg).saturating_add(olen);
                    if total > max_out || total > cap {
                        return None;
                    }
                    let chunk = out & mask(len as u32);
                    for _ in 0..arg {
                        out = append(out, len as u32, chunk);
                    }
                    olen = total;
                } else {
                    let start = arg - 1;
                    let end = start.saturating_add(len);
                    if end > cond.len as u64 {
                        return None;
                    }
                    let total = olen + len;
                    if total > max_out || total > cap {
                        return None;
                    }
                    let piece = (cond.bits >> (cond.len as u64 - end)) & mask(len as u32);
                    out = append(out, len as u32, piece);
                    olen = total;
                }
            }
        }
    }
    (olen == cap).then_some(out)
}

#[inline]
fn append(out: u64, width: u32, piece: u64) -> u64 {
    if width >= 64 {
        piece
    } else {
        (out << width) | piece
    }
}

#[inline]
fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}
