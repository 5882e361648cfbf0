//! Report serialization and curve rendering.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::eval::SampleSet;

/// Pretty JSON with every float printed as `{:.16e}` (17 significant
/// digits). Non-finite floats are written as `null` by serde_json itself.
pub struct ReportFormatter<'a>(PrettyFormatter<'a>);

impl Default for ReportFormatter<'_> {
    fn default() -> Self {
        ReportFormatter(PrettyFormatter::with_indent(b"  "))
    }
}

impl Formatter for ReportFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ReportFormatter::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    std::fs::write(path, to_json_string(value)?)
}

/// Renders the graph of `f₁` into a `width × height` 8-bit graymap: white
/// sample dots on black, top row at `max f₁`.
pub fn write_curve_pgm<W: Write>(
    s: &SampleSet,
    mut w: W,
    width: usize,
    height: usize,
) -> io::Result<()> {
    let (x0, x1) = (s.x[0], s.x[s.len() - 1]);
    let (lo, hi) =
        s.f1.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                (l.min(v), h.max(v))
            });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut img = vec![0u8; width * height];
    for (x, f, _) in s.iter() {
        let c = ((x - x0) / (x1 - x0) * (width - 1) as f64).round() as usize;
        let r = ((hi - f) / span * (height - 1) as f64).round() as usize;
        img[r.min(height - 1) * width + c.min(width - 1)] = 255;
    }
    write!(
        w,
        "P5\n# column c: x = {x0:.16e} + c * {:.16e}; row r: f1 = {hi:.16e} - r * {:.16e}\n{width} {height}\n255\n",
        (x1 - x0) / (width - 1) as f64,
        span / (height - 1) as f64
    )?;
    w.write_all(&img)
}
