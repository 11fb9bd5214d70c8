//! PCD v0.7 reader and writer.
//!
//! Supported encodings are `ascii` and uncompressed `binary`. The `FIELDS`
//! list may be any superset of `x y z`; an `rgb`/`rgba` field is decoded as
//! packed 8-bit color when present.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Point3;

use super::{Organization, PointCloud};
use crate::error::{io_err, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PcdEncoding {
    Ascii,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Int,
    Uint,
    Float,
}

#[derive(Clone, Debug)]
struct Field {
    name: String,
    size: usize,
    kind: Kind,
    count: usize,
    /// Offset in values (ascii) of the first element.
    value_offset: usize,
    /// Offset in bytes (binary) of the first element.
    byte_offset: usize,
}

#[derive(Debug)]
struct Header {
    fields: Vec<Field>,
    width: usize,
    height: usize,
    points: usize,
    viewpoint: Point3<f64>,
    encoding: PcdEncoding,
    /// Line number of the DATA line (1-based).
    data_line: usize,
}

impl Header {
    fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }

    fn values_per_point(&self) -> usize {
        self.fields.iter().map(|f| f.count).sum()
    }

    fn record_bytes(&self) -> usize {
        self.fields.iter().map(|f| f.count * f.size).sum()
    }
}

/// Loads a PCD file from disk.
pub fn load_pcd(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    read_pcd(&bytes, path)
}

/// Parses PCD bytes; `origin` is only used in error messages.
pub fn read_pcd(bytes: &[u8], origin: &Path) -> Result<PointCloud> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };

    let mut fields: Vec<String> = Vec::new();
    let mut sizes: Option<Vec<usize>> = None;
    let mut types: Option<Vec<Kind>> = None;
    let mut counts: Option<Vec<usize>> = None;
    let mut width = None;
    let mut height = None;
    let mut points = None;
    let mut viewpoint = Point3::origin();
    let mut encoding = None;

    let mut pos = 0;
    let mut line_no = 0;
    while pos < bytes.len() {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(bytes.len(), |e| pos + e);
        line_no += 1;
        let line = std::str::from_utf8(&bytes[pos..end])
            .map_err(|_| parse_err(line_no, "header is not valid UTF-8".into()))?
            .trim();
        pos = (end + 1).min(bytes.len());
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let key = tokens.next().unwrap_or_default().to_ascii_uppercase();
        let rest: Vec<&str> = tokens.collect();
        let numbers = |what: &str| -> Result<Vec<usize>> {
            rest.iter()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| parse_err(line_no, format!("bad {what} value {t:?}")))
                })
                .collect()
        };
        let single = |what: &str| -> Result<usize> {
            match numbers(what)?.as_slice() {
                [v] => Ok(*v),
                _ => Err(parse_err(line_no, format!("{what} expects one value"))),
            }
        };
        match key.as_str() {
            "VERSION" => {}
            "FIELDS" => fields = rest.iter().map(|s| s.to_string()).collect(),
            "SIZE" => sizes = Some(numbers("SIZE")?),
            "TYPE" => {
                types = Some(
                    rest.iter()
                        .map(|t| match *t {
                            "I" | "i" => Ok(Kind::Int),
                            "U" | "u" => Ok(Kind::Uint),
                            "F" | "f" => Ok(Kind::Float),
                            other => Err(parse_err(line_no, format!("unknown TYPE {other:?}"))),
                        })
                        .collect::<Result<_>>()?,
                )
            }
            "COUNT" => counts = Some(numbers("COUNT")?),
            "WIDTH" => width = Some(single("WIDTH")?),
            "HEIGHT" => height = Some(single("HEIGHT")?),
            "POINTS" => points = Some(single("POINTS")?),
            "VIEWPOINT" => {
                let vals: Vec<f64> = rest
                    .iter()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| parse_err(line_no, format!("bad VIEWPOINT value {t:?}")))
                    })
                    .collect::<Result<_>>()?;
                if vals.len() != 7 {
                    return Err(parse_err(line_no, "VIEWPOINT expects 7 values".into()));
                }
                viewpoint = Point3::new(vals[0], vals[1], vals[2]);
            }
            "DATA" => {
                encoding = Some(match rest.first().map(|s| s.to_ascii_lowercase()).as_deref() {
                    Some("ascii") => PcdEncoding::Ascii,
                    Some("binary") => PcdEncoding::Binary,
                    Some("binary_compressed") => {
                        return Err(Error::UnsupportedFormat {
                            path: origin.to_path_buf(),
                            msg: "binary_compressed PCD is not supported".into(),
                        })
                    }
                    other => {
                        return Err(parse_err(line_no, format!("unknown DATA encoding {other:?}")))
                    }
                });
                break;
            }
            other => return Err(parse_err(line_no, format!("unknown header key {other:?}"))),
        }
    }

    let data_line = line_no;
    let encoding = encoding.ok_or_else(|| parse_err(line_no, "missing DATA line".into()))?;
    let n = fields.len();
    if n == 0 {
        return Err(parse_err(data_line, "missing FIELDS".into()));
    }
    let sizes = sizes.ok_or_else(|| parse_err(data_line, "missing SIZE".into()))?;
    let types = types.ok_or_else(|| parse_err(data_line, "missing TYPE".into()))?;
    let counts = counts.unwrap_or_else(|| vec![1; n]);
    if sizes.len() != n || types.len() != n || counts.len() != n {
        return Err(parse_err(
            data_line,
            format!(
                "FIELDS has {n} entries but SIZE/TYPE/COUNT have {}/{}/{}",
                sizes.len(),
                types.len(),
                counts.len()
            ),
        ));
    }
    let width = width.ok_or_else(|| parse_err(data_line, "missing WIDTH".into()))?;
    let height = height.unwrap_or(1);
    let points = points.unwrap_or(width * height);
    if width * height != points {
        return Err(parse_err(
            data_line,
            format!("WIDTH*HEIGHT = {} but POINTS = {points}", width * height),
        ));
    }

    let mut value_offset = 0;
    let mut byte_offset = 0;
    let mut parsed = Vec::with_capacity(n);
    for i in 0..n {
        let (size, kind, count) = (sizes[i], types[i], counts[i]);
        let size_ok = match kind {
            Kind::Float => size == 4 || size == 8,
            _ => matches!(size, 1 | 2 | 4 | 8),
        };
        if !size_ok || count == 0 {
            return Err(parse_err(
                data_line,
                format!("field {:?} has unsupported SIZE {size} / COUNT {count}", fields[i]),
            ));
        }
        parsed.push(Field {
            name: fields[i].clone(),
            size,
            kind,
            count,
            value_offset,
            byte_offset,
        });
        value_offset += count;
        byte_offset += count * size;
    }
    let header = Header {
        fields: parsed,
        width,
        height,
        points,
        viewpoint,
        encoding,
        data_line,
    };
    for axis in ["x", "y", "z"] {
        if header.field(axis).is_none() {
            return Err(parse_err(data_line, format!("FIELDS lacks {axis:?}")));
        }
    }

    let body = &bytes[pos.min(bytes.len())..];
    let (pts, colors) = match header.encoding {
        PcdEncoding::Ascii => decode_ascii(&header, body, &parse_err)?,
        PcdEncoding::Binary => decode_binary(&header, body, &parse_err)?,
    };
    let organization = (header.height > 1).then_some(Organization {
        width: header.width,
        height: header.height,
    });
    let cloud = match colors {
        Some(c) => PointCloud::from_points_and_colors(pts, c)?,
        None => PointCloud::from_points(pts),
    };
    Ok(cloud
        .with_viewpoint(header.viewpoint)
        .with_organization(organization))
}

type Decoded = (Vec<Point3<f64>>, Option<Vec<[u8; 3]>>);

fn color_field(header: &Header) -> Option<&Field> {
    header
        .field("rgb")
        .or_else(|| header.field("rgba"))
        .filter(|f| f.size == 4)
}

fn unpack_rgb(bits: u32) -> [u8; 3] {
    [(bits >> 16) as u8, (bits >> 8) as u8, bits as u8]
}

fn decode_ascii(
    header: &Header,
    body: &[u8],
    parse_err: &dyn Fn(usize, String) -> Error,
) -> Result<Decoded> {
    let text = std::str::from_utf8(body)
        .map_err(|_| parse_err(header.data_line + 1, "ASCII data is not valid UTF-8".into()))?;
    let per_point = header.values_per_point();
    let [xf, yf, zf] = ["x", "y", "z"].map(|a| header.field(a).unwrap().value_offset);
    let cf = color_field(header);
    let mut pts = Vec::with_capacity(header.points);
    let mut colors = cf.map(|_| Vec::with_capacity(header.points));
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line_no = header.data_line + 1 + i;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != per_point {
            return Err(parse_err(
                line_no,
                format!("expected {per_point} values, found {}", tokens.len()),
            ));
        }
        rows += 1;
        if rows > header.points {
            return Err(parse_err(
                line_no,
                format!("more data rows than POINTS = {}", header.points),
            ));
        }
        let num = |k: usize| -> Result<f64> {
            tokens[k]
                .parse::<f64>()
                .map_err(|_| parse_err(line_no, format!("bad number {:?}", tokens[k])))
        };
        pts.push(Point3::new(num(xf)?, num(yf)?, num(zf)?));
        if let (Some(f), Some(colors)) = (cf, colors.as_mut()) {
            let tok = tokens[f.value_offset];
            let bits = match f.kind {
                Kind::Float => tok.parse::<f32>().map(f32::to_bits).ok(),
                _ => tok.parse::<u32>().ok(),
            }
            .ok_or_else(|| parse_err(line_no, format!("bad color value {tok:?}")))?;
            colors.push(unpack_rgb(bits));
        }
    }
    if rows != header.points {
        return Err(parse_err(
            header.data_line,
            format!("POINTS = {} but found {rows} data rows", header.points),
        ));
    }
    Ok((pts, colors))
}

fn read_scalar(field: &Field, rec: &[u8]) -> f64 {
    let b = &rec[field.byte_offset..field.byte_offset + field.size];
    match (field.kind, field.size) {
        (Kind::Float, 4) => f32::from_le_bytes(b.try_into().unwrap()) as f64,
        (Kind::Float, _) => f64::from_le_bytes(b.try_into().unwrap()),
        (Kind::Int, 1) => b[0] as i8 as f64,
        (Kind::Int, 2) => i16::from_le_bytes(b.try_into().unwrap()) as f64,
        (Kind::Int, 4) => i32::from_le_bytes(b.try_into().unwrap()) as f64,
        (Kind::Int, _) => i64::from_le_bytes(b.try_into().unwrap()) as f64,
        (Kind::Uint, 1) => b[0] as f64,
        (Kind::Uint, 2) => u16::from_le_bytes(b.try_into().unwrap()) as f64,
        (Kind::Uint, 4) => u32::from_le_bytes(b.try_into().unwrap()) as f64,
        (Kind::Uint, _) => u64::from_le_bytes(b.try_into().unwrap()) as f64,
    }
}

fn decode_binary(
    header: &Header,
    body: &[u8],
    parse_err: &dyn Fn(usize, String) -> Error,
) -> Result<Decoded> {
    let rec = header.record_bytes();
    let need = rec * header.points;
    if body.len() < need {
        return Err(parse_err(
            header.data_line,
            format!(
                "binary payload holds {} bytes, {} points need {need}",
                body.len(),
                header.points
            ),
        ));
    }
    let [xf, yf, zf] = ["x", "y", "z"].map(|a| header.field(a).unwrap());
    let cf = color_field(header);
    let mut pts = Vec::with_capacity(header.points);
    let mut colors = cf.map(|_| Vec::with_capacity(header.points));
    for chunk in body[..need].chunks_exact(rec.max(1)) {
        pts.push(Point3::new(
            read_scalar(xf, chunk),
            read_scalar(yf, chunk),
            read_scalar(zf, chunk),
        ));
        if let (Some(f), Some(colors)) = (cf, colors.as_mut()) {
            let b = &chunk[f.byte_offset..f.byte_offset + 4];
            colors.push(unpack_rgb(u32::from_le_bytes(b.try_into().unwrap())));
        }
    }
    Ok((pts, colors))
}

/// Serializes a cloud as PCD v0.7 with `F 8` coordinates and, when the cloud
/// has colors, a packed `U 4` rgb field.
pub fn write_pcd(cloud: &PointCloud, out: &mut impl Write, encoding: PcdEncoding) -> std::io::Result<()> {
    let colors = cloud.colors();
    let (fields, size, ty, count) = if colors.is_some() {
        ("x y z rgb", "8 8 8 4", "F F F U", "1 1 1 1")
    } else {
        ("x y z", "8 8 8", "F F F", "1 1 1")
    };
    let (width, height) = match cloud.organization() {
        Some(o) if o.width * o.height == cloud.len() => (o.width, o.height),
        _ => (cloud.len(), 1),
    };
    let vp = cloud.viewpoint();
    writeln!(out, "# .PCD v0.7 - Point Cloud Data file format")?;
    writeln!(out, "VERSION 0.7")?;
    writeln!(out, "FIELDS {fields}")?;
    writeln!(out, "SIZE {size}")?;
    writeln!(out, "TYPE {ty}")?;
    writeln!(out, "COUNT {count}")?;
    writeln!(out, "WIDTH {width}")?;
    writeln!(out, "HEIGHT {height}")?;
    writeln!(out, "VIEWPOINT {} {} {} 1 0 0 0", vp.x, vp.y, vp.z)?;
    writeln!(out, "POINTS {}", cloud.len())?;
    let packed = |c: [u8; 3]| (u32::from(c[0]) << 16) | (u32::from(c[1]) << 8) | u32::from(c[2]);
    match encoding {
        PcdEncoding::Ascii => {
            writeln!(out, "DATA ascii")?;
            for (i, p) in cloud.points().iter().enumerate() {
                match colors {
                    Some(c) => writeln!(out, "{} {} {} {}", p.x, p.y, p.z, packed(c[i]))?,
                    None => writeln!(out, "{} {} {}", p.x, p.y, p.z)?,
                }
            }
        }
        PcdEncoding::Binary => {
            writeln!(out, "DATA binary")?;
            for (i, p) in cloud.points().iter().enumerate() {
                for v in [p.x, p.y, p.z] {
                    out.write_all(&v.to_le_bytes())?;
                }
                if let Some(c) = colors {
                    out.write_all(&packed(c[i]).to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_pcd_file(cloud: &PointCloud, path: impl AsRef<Path>, encoding: PcdEncoding) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_pcd(cloud, &mut buf, encoding).map_err(io_err(path))?;
    fs::write(path, buf).map_err(io_err(path))
}
