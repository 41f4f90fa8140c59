use std::io::Write;

use super::{Spectrum, Trajectory};
use crate::error::Result;

fn header<W: Write>(w: &mut W, lines: &[String]) -> Result<()> {
    for line in lines {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

/// `t,re_c,im_c,norm`, preceded by `#`-prefixed header lines.
pub fn write_trajectory_csv<W: Write>(
    mut w: W,
    header_lines: &[String],
    tr: &Trajectory,
) -> Result<()> {
    header(&mut w, header_lines)?;
    writeln!(w, "t,re_c,im_c,norm")?;
    for (n, (c, norm)) in tr.c_t.iter().zip(&tr.norm_t).enumerate() {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            tr.grid.time(n),
            c.re,
            c.im,
            norm
        )?;
    }
    Ok(())
}

/// `omega,intensity`, preceded by `#`-prefixed header lines.
pub fn write_spectrum_csv<W: Write>(mut w: W, header_lines: &[String], s: &Spectrum) -> Result<()> {
    header(&mut w, header_lines)?;
    writeln!(w, "omega,intensity")?;
    for (omega, a) in s.omega.iter().zip(&s.intensity) {
        writeln!(w, "{omega:.16e},{a:.16e}")?;
    }
    Ok(())
}
