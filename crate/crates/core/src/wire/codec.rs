use super::frame::{Frame, Reader, Tag};
use super::WireError;
use crate::ckks::{Ciphertext, CkksContext, HeParams, KeyBundle, PublicKey, RelinKey, RnsPoly, SecretKey};

fn check_id(expected: u64, found: u64) -> Result<(), WireError> {
    if expected != found {
        return Err(WireError::ParamMismatch { expected, found });
    }
    Ok(())
}

fn write_poly(out: &mut Vec<u8>, p: &RnsPoly) {
    for r in p.residues() {
        for c in r {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
}

fn read_poly(r: &mut Reader<'_>, ctx: &CkksContext, level: usize) -> Result<RnsPoly, WireError> {
    let n = ctx.degree();
    let mut residues = Vec::with_capacity(level + 1);
    for j in 0..=level {
        let q = ctx.modulus(j).value();
        let raw = r.take(8 * n)?;
        let mut residue = Vec::with_capacity(n);
        for chunk in raw.chunks_exact(8) {
            let c = u64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            if c >= q {
                return Err(WireError::BadSection(format!("coefficient {c} not reduced modulo {q}")));
            }
            residue.push(c);
        }
        residues.push(residue);
    }
    Ok(RnsPoly::from_residues(residues))
}

pub(crate) fn ciphertext_body(ct: &Ciphertext) -> Vec<u8> {
    let parts = ct.parts();
    let n = parts[0].residue(0).len();
    let mut out = Vec::with_capacity(19 + parts.len() * (ct.level() + 1) * n * 8);
    out.extend_from_slice(&ct.param_id().to_le_bytes());
    out.extend_from_slice(&(ct.level() as u16).to_le_bytes());
    out.push(parts.len() as u8);
    out.extend_from_slice(&ct.scale().to_bits().to_le_bytes());
    for p in parts {
        write_poly(&mut out, p);
    }
    out
}

pub(crate) fn read_ciphertext_body(body: &[u8], ctx: &CkksContext) -> Result<Ciphertext, WireError> {
    let mut r = Reader::new(body, "ciphertext");
    check_id(ctx.param_id(), r.u64()?)?;
    let level = r.u16()? as usize;
    ctx.check_level(level)?;
    let count = r.u8()? as usize;
    if !(2..=3).contains(&count) {
        return Err(WireError::BadSection(format!("ciphertext with {count} parts")));
    }
    let scale = r.f64()?;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(WireError::BadSection(format!("ciphertext scale {scale}")));
    }
    let parts = (0..count)
        .map(|_| read_poly(&mut r, ctx, level))
        .collect::<Result<Vec<_>, _>>()?;
    r.finish()?;
    Ok(Ciphertext::from_parts(parts, scale, ctx.param_id())?)
}

pub(crate) fn public_key_body(pk: &PublicKey) -> Vec<u8> {
    let mut out = pk.param_id().to_le_bytes().to_vec();
    write_poly(&mut out, pk.b());
    write_poly(&mut out, pk.a());
    out
}

pub(crate) fn read_public_key_body(body: &[u8], ctx: &CkksContext) -> Result<PublicKey, WireError> {
    let mut r = Reader::new(body, "public key");
    check_id(ctx.param_id(), r.u64()?)?;
    let b = read_poly(&mut r, ctx, ctx.max_level())?;
    let a = read_poly(&mut r, ctx, ctx.max_level())?;
    r.finish()?;
    Ok(PublicKey::from_parts(b, a, ctx.param_id()))
}

pub(crate) fn relin_key_body(rk: &RelinKey) -> Vec<u8> {
    let mut out = rk.param_id().to_le_bytes().to_vec();
    out.push(rk.decomposition_bits() as u8);
    out.extend_from_slice(&(rk.entries().len() as u16).to_le_bytes());
    for row in rk.entries() {
        out.extend_from_slice(&(row.len() as u16).to_le_bytes());
        for [b, a] in row {
            write_poly(&mut out, b);
            write_poly(&mut out, a);
        }
    }
    out
}

pub(crate) fn read_relin_key_body(body: &[u8], ctx: &CkksContext) -> Result<RelinKey, WireError> {
    let mut r = Reader::new(body, "relinearization key");
    check_id(ctx.param_id(), r.u64()?)?;
    let bits = r.u8()? as u32;
    let rows = r.u16()? as usize;
    if rows != ctx.max_level() + 1 {
        return Err(WireError::BadSection(format!("relinearization key with {rows} rows")));
    }
    let mut entries = Vec::with_capacity(rows);
    for _ in 0..rows {
        let digits = r.u16()? as usize;
        if digits > 64 {
            return Err(WireError::BadSection(format!("{digits} relinearization digits")));
        }
        let mut row = Vec::with_capacity(digits);
        for _ in 0..digits {
            let b = read_poly(&mut r, ctx, ctx.max_level())?;
            let a = read_poly(&mut r, ctx, ctx.max_level())?;
            row.push([b, a]);
        }
        entries.push(row);
    }
    r.finish()?;
    let key = RelinKey::from_entries(bits, entries, ctx.param_id());
    key.validate(ctx)?;
    Ok(key)
}

fn secret_key_body(sk: &SecretKey) -> Vec<u8> {
    let mut out = sk.param_id().to_le_bytes().to_vec();
    out.extend_from_slice(&(sk.coeffs().len() as u32).to_le_bytes());
    out.extend(sk.coeffs().iter().map(|&c| c as i8 as u8));
    out
}

fn read_secret_key_body(body: &[u8], ctx: &CkksContext) -> Result<SecretKey, WireError> {
    let mut r = Reader::new(body, "secret key");
    check_id(ctx.param_id(), r.u64()?)?;
    let n = r.u32()? as usize;
    if n != ctx.degree() {
        return Err(WireError::BadSection(format!("secret key of degree {n}")));
    }
    let coeffs = r.take(n)?.iter().map(|&b| b as i8 as i64).collect();
    r.finish()?;
    Ok(SecretKey::from_coeffs(coeffs, ctx.param_id())?)
}

fn params_frame(params: &HeParams) -> Frame {
    let mut f = Frame::new();
    f.push(Tag::Params, params.descriptor_bytes());
    f
}

pub(crate) fn frame_params(frame: &Frame) -> Result<HeParams, WireError> {
    Ok(HeParams::from_descriptor_bytes(frame.one(Tag::Params, "parameter")?)?)
}

/// Parameters carried by any frame that has a parameter section.
pub fn read_params(bytes: &[u8]) -> Result<HeParams, WireError> {
    frame_params(&Frame::decode(bytes)?)
}

pub fn serialize_ciphertext(ct: &Ciphertext, params: &HeParams) -> Result<Vec<u8>, WireError> {
    check_id(params.param_id(), ct.param_id())?;
    let mut f = params_frame(params);
    f.push(Tag::Ciphertext, ciphertext_body(ct));
    Ok(f.encode())
}

/// Decodes a ciphertext frame, insisting that it was made under `params`.
pub fn deserialize_ciphertext(bytes: &[u8], params: &HeParams) -> Result<Ciphertext, WireError> {
    let frame = Frame::decode(bytes)?;
    let carried = frame_params(&frame)?;
    check_id(params.param_id(), carried.param_id())?;
    let ctx = CkksContext::new(params)?;
    read_ciphertext_body(frame.one(Tag::Ciphertext, "ciphertext")?, &ctx)
}

pub fn serialize_public_key(pk: &PublicKey, params: &HeParams) -> Result<Vec<u8>, WireError> {
    check_id(params.param_id(), pk.param_id())?;
    let mut f = params_frame(params);
    f.push(Tag::PublicKey, public_key_body(pk));
    Ok(f.encode())
}

pub fn deserialize_public_key(bytes: &[u8]) -> Result<(HeParams, PublicKey), WireError> {
    let frame = Frame::decode(bytes)?;
    let params = frame_params(&frame)?;
    let ctx = CkksContext::new(&params)?;
    let pk = read_public_key_body(frame.one(Tag::PublicKey, "public key")?, &ctx)?;
    Ok((params, pk))
}

pub fn serialize_relin_key(rk: &RelinKey, params: &HeParams) -> Result<Vec<u8>, WireError> {
    check_id(params.param_id(), rk.param_id())?;
    let mut f = params_frame(params);
    f.push(Tag::RelinKey, relin_key_body(rk));
    Ok(f.encode())
}

pub fn deserialize_relin_key(bytes: &[u8]) -> Result<(HeParams, RelinKey), WireError> {
    let frame = Frame::decode(bytes)?;
    let params = frame_params(&frame)?;
    let ctx = CkksContext::new(&params)?;
    let rk = read_relin_key_body(frame.one(Tag::RelinKey, "relinearization key")?, &ctx)?;
    Ok((params, rk))
}

/// Full key bundle, secret key included. For the local keystore only.
pub fn serialize_key_bundle(keys: &KeyBundle, params: &HeParams) -> Result<Vec<u8>, WireError> {
    check_id(params.param_id(), keys.param_id())?;
    let mut f = params_frame(params);
    f.push(Tag::SecretKey, secret_key_body(&keys.secret_key));
    f.push(Tag::PublicKey, public_key_body(&keys.public_key));
    f.push(Tag::RelinKey, relin_key_body(&keys.relin_key));
    Ok(f.encode())
}

pub fn deserialize_key_bundle(bytes: &[u8]) -> Result<(HeParams, KeyBundle), WireError> {
    let frame = Frame::decode(bytes)?;
    let params = frame_params(&frame)?;
    let ctx = CkksContext::new(&params)?;
    let keys = KeyBundle {
        secret_key: read_secret_key_body(frame.one(Tag::SecretKey, "secret key")?, &ctx)?,
        public_key: read_public_key_body(frame.one(Tag::PublicKey, "public key")?, &ctx)?,
        relin_key: read_relin_key_body(frame.one(Tag::RelinKey, "relinearization key")?, &ctx)?,
    };
    Ok((params, keys))
}

pub(crate) fn secret_key_section(sk: &SecretKey) -> Vec<u8> {
    secret_key_body(sk)
}

pub(crate) fn read_secret_key_section(body: &[u8], ctx: &CkksContext) -> Result<SecretKey, WireError> {
    read_secret_key_body(body, ctx)
}

/// Clear slot values as a frame with one values section.
pub fn serialize_values(values: &[f64]) -> Vec<u8> {
    let mut body = Vec::with_capacity(4 + 8 * values.len());
    body.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        body.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    let mut f = Frame::new();
    f.push(Tag::Values, body);
    f.encode()
}

pub fn deserialize_values(bytes: &[u8]) -> Result<Vec<f64>, WireError> {
    let frame = Frame::decode(bytes)?;
    let mut r = Reader::new(frame.one(Tag::Values, "values")?, "values");
    let n = r.u32()? as usize;
    let raw = r.take(n.checked_mul(8).ok_or_else(|| WireError::BadSection("values length".into()))?)?;
    r.finish()?;
    Ok(raw
        .chunks_exact(8)
        .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().expect("8 bytes"))))
        .collect())
}
