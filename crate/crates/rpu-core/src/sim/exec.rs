//! Architectural semantics of each instruction, applied in program order.

use alloc::vec::Vec;

use super::{Fault, RpuState};
use crate::isa::{BcastSrc, CmpMode, Instr, MReg, ShufMode, VReg, VLEN};
use crate::modmath::Modulus;

const H: usize = VLEN / 2;

impl RpuState {
    fn vreg(&self, v: VReg) -> &[u128] {
        &self.vregs[v.index() * VLEN..(v.index() + 1) * VLEN]
    }

    fn vreg_mut(&mut self, v: VReg) -> &mut [u128] {
        &mut self.vregs[v.index() * VLEN..(v.index() + 1) * VLEN]
    }

    pub fn vector(&self, v: VReg) -> Vec<u128> {
        self.vreg(v).to_vec()
    }

    pub fn set_vector(&mut self, v: VReg, data: &[u128]) {
        self.vreg_mut(v).copy_from_slice(&data[..VLEN]);
    }

    fn modulus(&self, m: MReg) -> Result<Modulus, Fault> {
        self.mregs[m.index()].ok_or(Fault::UnsetModulus(m.0))
    }

    fn vdm_addr(&self, base: u64, i: usize, stride: u16) -> Result<usize, Fault> {
        let a = base + (i as u64) * stride as u64;
        if a >= self.vdm.len() as u64 {
            return Err(Fault::VdmAddress(a));
        }
        Ok(a as usize)
    }

    fn elementwise(&mut self, vd: VReg, va: VReg, vb: VReg, f: impl Fn(u128, u128) -> u128) {
        let out: Vec<u128> = self.vreg(va).iter().zip(self.vreg(vb)).map(|(&x, &y)| f(x, y)).collect();
        self.vreg_mut(vd).copy_from_slice(&out);
    }

    /// Apply one instruction's effect on registers and memories.
    pub(crate) fn execute(&mut self, ins: &Instr) -> Result<(), Fault> {
        match *ins {
            Instr::Enter | Instr::Leave => {}
            Instr::VLoad { vd, base, off } | Instr::VLoadS { vd, base, off, .. } => {
                let stride = if let Instr::VLoadS { stride, .. } = *ins { stride } else { 1 };
                let b = self.aregs[base.index()] + off as u64;
                let mut buf = [0u128; VLEN];
                for (i, slot) in buf.iter_mut().enumerate() {
                    *slot = self.vdm[self.vdm_addr(b, i, stride)?];
                }
                self.vreg_mut(vd).copy_from_slice(&buf);
            }
            Instr::VStore { base, off, vs } | Instr::VStoreS { base, off, vs, .. } => {
                let stride = if let Instr::VStoreS { stride, .. } = *ins { stride } else { 1 };
                let b = self.aregs[base.index()] + off as u64;
                // check the whole range first so a fault leaves memory untouched
                self.vdm_addr(b, VLEN - 1, stride)?;
                for i in 0..VLEN {
                    let a = self.vdm_addr(b, i, stride)?;
                    self.vdm[a] = self.vregs[vs.index() * VLEN + i];
                }
            }
            Instr::VBroadcast { vd, src } => {
                let x = match src {
                    BcastSrc::Scalar(s) => self.sregs[s.index()],
                    BcastSrc::Mem { base, off } => self.sdm_read(self.aregs[base.index()] + off as u64)?,
                };
                self.vreg_mut(vd).fill(x);
            }
            Instr::VAddMod { vd, va, vb, m } => {
                let q = self.modulus(m)?;
                self.elementwise(vd, va, vb, |x, y| q.add(x % q.q(), y % q.q()));
            }
            Instr::VSubMod { vd, va, vb, m } => {
                let q = self.modulus(m)?;
                self.elementwise(vd, va, vb, |x, y| q.sub(x % q.q(), y % q.q()));
            }
            Instr::VMulMod { vd, va, vb, m } => {
                let q = self.modulus(m)?;
                let v = self.variant;
                self.elementwise(vd, va, vb, |x, y| q.mul_with(x % q.q(), y % q.q(), v));
            }
            Instr::VSMulMod { vd, va, s, m } => {
                let q = self.modulus(m)?;
                let c = self.sregs[s.index()] % q.q();
                let v = self.variant;
                let out: Vec<u128> = self.vreg(va).iter().map(|&x| q.mul_with(x % q.q(), c, v)).collect();
                self.vreg_mut(vd).copy_from_slice(&out);
            }
            Instr::VBfly { vx, vy, vw, m } | Instr::VIBfly { vx, vy, vw, m } => {
                let q = self.modulus(m)?;
                let v = self.variant;
                let gs = matches!(ins, Instr::VIBfly { .. });
                let (x, y, w) = (self.vector(vx), self.vector(vy), self.vector(vw));
                let mut nx = [0u128; VLEN];
                let mut ny = [0u128; VLEN];
                for i in 0..VLEN {
                    let (a, b, t) = (x[i] % q.q(), y[i] % q.q(), w[i] % q.q());
                    if gs {
                        nx[i] = q.add(a, b);
                        ny[i] = q.mul_with(q.sub(a, b), t, v);
                    } else {
                        let p = q.mul_with(b, t, v);
                        nx[i] = q.add(a, p);
                        ny[i] = q.sub(a, p);
                    }
                }
                // vx == vy leaves the second result, as a write-after-write would
                self.vreg_mut(vx).copy_from_slice(&nx);
                self.vreg_mut(vy).copy_from_slice(&ny);
            }
            Instr::VCmp { vd, va, vb, mode } => {
                self.elementwise(vd, va, vb, |x, y| match mode {
                    CmpMode::Ge => (x >= y) as u128,
                    CmpMode::Lt => (x < y) as u128,
                });
            }
            Instr::VShuf { vd, va, vb, mode } => {
                let (a, b) = (self.vector(va), self.vector(vb));
                let mut out = [0u128; VLEN];
                for i in 0..H {
                    match mode {
                        ShufMode::UnpackLo => {
                            out[2 * i] = a[i];
                            out[2 * i + 1] = b[i];
                        }
                        ShufMode::UnpackHi => {
                            out[2 * i] = a[H + i];
                            out[2 * i + 1] = b[H + i];
                        }
                        ShufMode::PackEven => {
                            out[i] = a[2 * i];
                            out[H + i] = b[2 * i];
                        }
                        ShufMode::PackOdd => {
                            out[i] = a[2 * i + 1];
                            out[H + i] = b[2 * i + 1];
                        }
                    }
                }
                self.vreg_mut(vd).copy_from_slice(&out);
            }
            Instr::SLoad { sd, base, off } => {
                self.sregs[sd.index()] = self.sdm_read(self.aregs[base.index()] + off as u64)?;
            }
            Instr::MSet { m, s } => {
                let v = self.sregs[s.index()];
                self.mregs[m.index()] = Some(Modulus::new(v).map_err(|_| Fault::BadModulus(v))?);
            }
            Instr::ASet { ad, src, imm, hi } => {
                if ad.0 != 0 {
                    let shift = if hi { 16 } else { 0 };
                    self.aregs[ad.index()] = src.map_or(0, |s| self.aregs[s.index()]) + ((imm as u64) << shift);
                }
            }
        }
        Ok(())
    }

    fn sdm_read(&self, a: u64) -> Result<u128, Fault> {
        self.sdm.get(a as usize).copied().ok_or(Fault::SdmAddress(a))
    }
}
