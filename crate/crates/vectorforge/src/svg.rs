//! The SVG subset written and read by vectorforge.
//!
//! ```text
//! <svg xmlns width height viewBox [style] [data-background="r g b"]>
//!   <path d="M x y (C x y x y x y)+ Z" fill="#rrggbb" [fill-opacity]
//!         [fill-rule="nonzero"] [data-fill-rgb="r g b"]/>*
//! </svg>
//! ```
//!
//! Paths are absolute, closed, and made of cubic segments only. The hex fill
//! is what viewers use; `data-fill-rgb` and `data-background` carry the exact
//! channel values so a file reproduces the scene it came from. Anything else
//! (other elements, transforms, strokes, gradients, relative commands) is
//! rejected with an error naming it.

use std::fmt::Write as _;
use std::path::Path;

use vectorforge_core::{Point, Rgb, Rgba, Scene, Shape};

use crate::error::{CliError, CliResult};
use crate::io::write_atomic;

const SVG_NS: &str = "http://www.w3.org/2000/svg";

fn hex(c: Rgb) -> String {
    let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", q(c.r), q(c.g), q(c.b))
}

fn triple(c: Rgb) -> String {
    format!("{} {} {}", c.r, c.g, c.b)
}

fn path_data(shape: &Shape) -> String {
    let pts = shape.points();
    let mut d = format!("M {} {}", pts[0].x, pts[0].y);
    for seg in shape.segments() {
        let _ = write!(d, " C {} {} {} {} {} {}", seg.b.x, seg.b.y, seg.c.x, seg.c.y, seg.d.x, seg.d.y);
    }
    d.push_str(" Z");
    d
}

/// Serializes a scene as an SVG document.
pub fn svg_string(scene: &Scene) -> String {
    let (w, h) = (scene.width, scene.height);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="{SVG_NS}" width="{w}" height="{h}" viewBox="0 0 {w} {h}" style="background-color:{}" data-background="{}">"#,
        hex(scene.background),
        triple(scene.background),
    );
    for shape in &scene.shapes {
        let c = shape.color();
        let _ = writeln!(
            out,
            r#"  <path d="{}" fill="{}" fill-opacity="{}" fill-rule="nonzero" data-fill-rgb="{}"/>"#,
            path_data(shape),
            hex(c.rgb()),
            c.a,
            triple(c.rgb()),
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(scene: &Scene, path: &Path) -> CliResult<()> {
    write_atomic(path, svg_string(scene).as_bytes())
}

pub fn read_svg(path: &Path) -> CliResult<Scene> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_svg(&text).map_err(|m| CliError::format(path, m))
}

/// Parses a document in the subset above. Errors are human readable.
pub fn parse_svg(text: &str) -> Result<Scene, String> {
    let doc = roxmltree::Document::parse(text).map_err(|e| format!("malformed XML: {e}"))?;
    let root = doc.root_element();
    if root.tag_name().name() != "svg" || root.tag_name().namespace() != Some(SVG_NS) {
        return Err(format!("root element <{}> is not an SVG element", root.tag_name().name()));
    }
    for attr in root.attributes() {
        match attr.name() {
            "width" | "height" | "viewBox" | "style" | "data-background" | "version" => {}
            other => return Err(format!("unsupported attribute `{other}` on <svg>")),
        }
    }
    let dim = |name: &str| -> Result<usize, String> {
        let v = root.attribute(name).ok_or_else(|| format!("<svg> is missing `{name}`"))?;
        v.parse::<usize>().map_err(|_| format!("`{name}` must be a whole number of pixels, got `{v}`"))
    };
    let (width, height) = (dim("width")?, dim("height")?);
    if let Some(vb) = root.attribute("viewBox") {
        let expected = format!("0 0 {width} {height}");
        if vb.split_whitespace().collect::<Vec<_>>().join(" ") != expected {
            return Err(format!("viewBox `{vb}` differs from width/height"));
        }
    }
    let background = match root.attribute("data-background") {
        Some(v) => parse_triple(v)?,
        None => match root.attribute("style") {
            Some(s) => parse_background_style(s)?,
            None => Rgb::WHITE,
        },
    };
    let mut scene = Scene::new(width, height, background).map_err(|e| e.to_string())?;

    for node in root.children() {
        if node.is_text() {
            if node.text().is_some_and(|t| !t.trim().is_empty()) {
                return Err("unexpected text content".into());
            }
            continue;
        }
        if !node.is_element() {
            continue;
        }
        let name = node.tag_name().name();
        if name != "path" {
            return Err(format!("unsupported element <{name}>"));
        }
        scene.shapes.push(parse_path_element(&node)?);
    }
    Ok(scene)
}

fn parse_path_element(node: &roxmltree::Node) -> Result<Shape, String> {
    for attr in node.attributes() {
        match attr.name() {
            "d" | "fill" | "fill-opacity" | "fill-rule" | "data-fill-rgb" => {}
            other => return Err(format!("unsupported attribute `{other}` on <path>")),
        }
    }
    let fill = node.attribute("fill").ok_or("<path> without fill")?;
    let hex_rgb = parse_fill(fill)?;
    let rgb = match node.attribute("data-fill-rgb") {
        Some(v) => {
            let exact = parse_triple(v)?;
            if hex(exact) != hex(hex_rgb) {
                return Err(format!("data-fill-rgb `{v}` disagrees with fill `{fill}`"));
            }
            exact
        }
        None => hex_rgb,
    };
    let alpha = match node.attribute("fill-opacity") {
        Some(v) => parse_number(v)?,
        None => 1.0,
    };
    if !(0.0..=1.0).contains(&alpha) {
        return Err(format!("fill-opacity {alpha} outside [0, 1]"));
    }
    match node.attribute("fill-rule") {
        None | Some("nonzero") => {}
        Some(other) => return Err(format!("unsupported fill-rule `{other}`")),
    }
    let points = parse_path_data(node.attribute("d").ok_or("<path> without d")?)?;
    Shape::new(points, Rgba::new(rgb.r, rgb.g, rgb.b, alpha)).map_err(|e| e.to_string())
}

fn parse_number(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("bad number `{s}`"))
}

fn parse_triple(s: &str) -> Result<Rgb, String> {
    let v: Vec<f64> = s.split_whitespace().map(parse_number).collect::<Result<_, _>>()?;
    match v[..] {
        [r, g, b] if v.iter().all(|c| (0.0..=1.0).contains(c)) => Ok(Rgb::new(r, g, b)),
        _ => Err(format!("expected three channels in [0, 1], got `{s}`")),
    }
}

fn parse_fill(fill: &str) -> Result<Rgb, String> {
    let f = fill.trim();
    if f.starts_with("url(") {
        return Err(format!("gradient/pattern fill `{f}` is not supported"));
    }
    let digits = f
        .strip_prefix('#')
        .filter(|d| d.len() == 6 && d.chars().all(|c| c.is_ascii_hexdigit()))
        .ok_or_else(|| format!("fill `{f}` is not #rrggbb"))?;
    let ch = |i: usize| u8::from_str_radix(&digits[i..i + 2], 16).unwrap() as f64 / 255.0;
    Ok(Rgb::new(ch(0), ch(2), ch(4)))
}

fn parse_background_style(style: &str) -> Result<Rgb, String> {
    for decl in style.split(';') {
        let Some((k, v)) = decl.split_once(':') else { continue };
        match k.trim() {
            "background-color" => return parse_fill(v),
            "" => {}
            other => return Err(format!("unsupported style property `{other}`")),
        }
    }
    Ok(Rgb::WHITE)
}

#[derive(Debug, PartialEq)]
enum Token {
    Cmd(char),
    Num(f64),
}

fn tokenize(d: &str) -> Result<Vec<Token>, String> {
    let mut out = Vec::new();
    let mut chars = d.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() || c == ',' {
            chars.next();
        } else if c.is_ascii_alphabetic() && c != 'e' && c != 'E' {
            out.push(Token::Cmd(c));
            chars.next();
        } else {
            let mut end = i;
            while let Some(&(j, c)) = chars.peek() {
                let exp_sign = (c == '-' || c == '+') && j > i && matches!(&d[j - 1..j], "e" | "E");
                let starts_new = (c == '-' || c == '+') && j > i && !exp_sign;
                if starts_new || !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')) {
                    break;
                }
                end = j + c.len_utf8();
                chars.next();
            }
            if end == i {
                return Err(format!("unexpected character `{c}` in path data"));
            }
            out.push(Token::Num(parse_number(&d[i..end])?));
        }
    }
    Ok(out)
}

/// Control points of an absolute `M (C)+ Z` path, in shape order.
fn parse_path_data(d: &str) -> Result<Vec<Point>, String> {
    let tokens = tokenize(d)?;
    let mut it = tokens.into_iter().peekable();
    let num = |it: &mut std::iter::Peekable<std::vec::IntoIter<Token>>| match it.next() {
        Some(Token::Num(v)) => Ok(v),
        other => Err(format!("expected a number in path data, found {other:?}")),
    };
    match it.next() {
        Some(Token::Cmd('M')) => {}
        Some(Token::Cmd(c)) => return Err(format!("path must start with M, found `{c}`")),
        _ => return Err("path must start with M".into()),
    }
    let start = Point::new(num(&mut it)?, num(&mut it)?);
    let mut points = vec![start];
    let mut closed = false;
    let mut in_curve = false;
    while let Some(tok) = it.peek() {
        match *tok {
            Token::Cmd('C') => {
                it.next();
                in_curve = true;
            }
            Token::Cmd('Z') | Token::Cmd('z') => {
                it.next();
                closed = true;
                break;
            }
            Token::Cmd(c) => return Err(format!("unsupported path command `{c}`")),
            Token::Num(_) if in_curve => {
                for _ in 0..3 {
                    points.push(Point::new(num(&mut it)?, num(&mut it)?));
                }
            }
            Token::Num(_) => return Err("coordinates without a command".into()),
        }
    }
    if !closed {
        return Err("path is not closed with Z".into());
    }
    if it.next().is_some() {
        return Err("path data continues after Z".into());
    }
    if points.len() < 7 {
        return Err("path needs at least two cubic segments".into());
    }
    if points.last() != Some(&start) {
        return Err("last segment does not end at the start point".into());
    }
    points.pop();
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_splits_compact_numbers() {
        let t = tokenize("M1-2C.5,1e-3 -4E+2 3").unwrap();
        assert_eq!(
            t,
            vec![
                Token::Cmd('M'),
                Token::Num(1.0),
                Token::Num(-2.0),
                Token::Cmd('C'),
                Token::Num(0.5),
                Token::Num(1e-3),
                Token::Num(-400.0),
                Token::Num(3.0),
            ]
        );
    }

    #[test]
    fn implicit_curve_repetition() {
        let d = "M 0 0 C 1 0 2 0 3 0 3 1 3 2 3 3 C 2 3 1 3 0 0 Z";
        assert_eq!(parse_path_data(d).unwrap().len(), 9);
    }

    #[test]
    fn rejects_open_and_relative_paths() {
        assert!(parse_path_data("M 0 0 C 1 0 2 0 3 0 C 2 3 1 3 0 0").is_err());
        assert!(parse_path_data("M 0 0 c 1 0 2 0 3 0 Z").unwrap_err().contains("`c`"));
        assert!(parse_path_data("M 0 0 C 1 0 2 0 3 0 C 2 3 1 3 0 1 Z").is_err());
        assert!(parse_path_data("M 0 0 L 1 1 Z").unwrap_err().contains("`L`"));
    }

    #[test]
    fn fill_forms() {
        assert_eq!(parse_fill("#ff0000").unwrap(), Rgb::new(1.0, 0.0, 0.0));
        assert!(parse_fill("url(#grad)").unwrap_err().contains("gradient"));
        assert!(parse_fill("red").is_err());
    }
}
