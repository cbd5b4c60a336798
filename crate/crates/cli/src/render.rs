//! Attention heatmaps as SVG, TSV, or terminal blocks.

use std::fmt::Write as _;

use attnsense::corpus::{vocab, SenseLabel};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Svg,
    Tsv,
    Terminal,
}

const BLOCKS: [char; 8] = ['▁', '▂', '▃', '▄', '▅', '▆', '▇', '█'];

#[derive(Clone, Debug, Default)]
pub struct Labels {
    pub gold: Vec<SenseLabel>,
    pub predicted: Option<SenseLabel>,
}

impl Labels {
    fn caption(&self) -> String {
        let gold: Vec<&str> = self.gold.iter().map(|l| l.as_str()).collect();
        let gold = if gold.is_empty() { "-".to_string() } else { gold.join("+") };
        let pred = self.predicted.map_or("-", SenseLabel::as_str);
        format!("gold: {gold}  predicted: {pred}")
    }
}

/// `α / max α`, or all zeros when every weight is zero.
pub fn intensities(alpha: &[f64]) -> Vec<f64> {
    let max = alpha.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![0.0; alpha.len()];
    }
    alpha.iter().map(|a| (a / max).clamp(0.0, 1.0)).collect()
}

/// One of the eight block glyphs; zero maps to the lowest block.
pub fn block(intensity: f64) -> char {
    BLOCKS[((intensity.clamp(0.0, 1.0) * 7.0).round()) as usize]
}

pub fn render(tokens: &[String], alpha: &[f64], labels: &Labels, format: Format) -> Result<String, CliError> {
    if tokens.len() != alpha.len() {
        return Err(CliError::Data(format!(
            "contract violation in render_attention: {} tokens but {} weights",
            tokens.len(),
            alpha.len()
        )));
    }
    Ok(match format {
        Format::Svg => render_svg(tokens, alpha, labels),
        Format::Tsv => render_tsv(tokens, alpha, labels),
        Format::Terminal => render_terminal(tokens, alpha, labels),
    })
}

pub fn render_tsv(tokens: &[String], alpha: &[f64], labels: &Labels) -> String {
    let mut out = format!("# {}\n", labels.caption());
    for (t, a) in tokens.iter().zip(alpha) {
        let _ = writeln!(out, "{t}\t{a:.6}");
    }
    out
}

/// Inverse of [`render_tsv`]; `#` lines are skipped.
pub fn parse_tsv(text: &str) -> Result<(Vec<String>, Vec<f64>), CliError> {
    let mut tokens = Vec::new();
    let mut alpha = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let (t, a) = line
            .split_once('\t')
            .ok_or_else(|| CliError::Data(format!("tsv line {}: expected token<TAB>weight", i + 1)))?;
        tokens.push(t.to_string());
        alpha.push(
            a.parse()
                .map_err(|e| CliError::Data(format!("tsv line {}: {e}", i + 1)))?,
        );
    }
    Ok((tokens, alpha))
}

pub fn render_terminal(tokens: &[String], alpha: &[f64], labels: &Labels) -> String {
    let mut out = format!("{}\n", labels.caption());
    for (t, x) in tokens.iter().zip(intensities(alpha)) {
        match t.as_str() {
            vocab::ARG1_OPEN | vocab::ARG2_OPEN => {
                let _ = writeln!(out, "┌─ {t}");
            }
            vocab::ARG1_CLOSE | vocab::ARG2_CLOSE => {
                let _ = writeln!(out, "└─ {t}");
            }
            _ => {
                let _ = writeln!(out, "│ {} {x:.3} {t}", block(x).to_string().repeat(3));
            }
        }
    }
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// One cell per token, filled with a dark blue whose opacity is the
/// max-normalized weight. Argument markers are drawn as vertical rules.
pub fn render_svg(tokens: &[String], alpha: &[f64], labels: &Labels) -> String {
    const CELL_W: usize = 44;
    const CELL_H: usize = 40;
    const RULE_W: usize = 12;
    const TOP: usize = 28;
    let widths: Vec<usize> = tokens
        .iter()
        .map(|t| if vocab::is_marker(t) { RULE_W } else { CELL_W })
        .collect();
    let width = widths.iter().sum::<usize>() + 20;
    let height = TOP + CELL_H + 20;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"  <text x="10" y="18" font-size="13">{}</text>"#, escape(&labels.caption()));
    let mut x = 10;
    for ((t, a), (w, i)) in tokens.iter().zip(alpha).zip(widths.iter().zip(intensities(alpha))) {
        if vocab::is_marker(t) {
            let rx = x + w / 2;
            let _ = writeln!(
                out,
                r##"  <line x1="{rx}" y1="{}" x2="{rx}" y2="{}" stroke="#333" stroke-width="2"><title>{} {a:.6}</title></line>"##,
                TOP - 4,
                TOP + CELL_H + 4,
                escape(t)
            );
        } else {
            let _ = writeln!(
                out,
                r##"  <rect x="{x}" y="{TOP}" width="{w}" height="{CELL_H}" fill="#08306b" fill-opacity="{i:.4}" stroke="#9ecae1"><title>{} {a:.6}</title></rect>"##,
                escape(t)
            );
            let fill = if i > 0.5 { "#fff" } else { "#000" };
            let _ = writeln!(
                out,
                r#"  <text x="{}" y="{}" font-size="14" text-anchor="middle" fill="{fill}">{}</text>"#,
                x + w / 2,
                TOP + CELL_H / 2 + 5,
                escape(t)
            );
        }
        x += w;
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn uniform_and_one_hot_intensity() {
        assert_eq!(intensities(&[0.25; 4]), vec![1.0; 4]);
        assert_eq!(intensities(&[0.0, 1.0, 0.0]), vec![0.0, 1.0, 0.0]);
        assert_eq!(block(1.0), '█');
        assert_eq!(block(0.0), '▁');
    }

    #[test]
    fn tsv_round_trip() {
        let t = toks(&["<ARG1>", "会谈", "a&b", "</ARG1>"]);
        let a = [0.1234564, 0.5, 0.3765436, 0.0];
        let text = render(&t, &a, &Labels::default(), Format::Tsv).unwrap();
        let (t2, a2) = parse_tsv(&text).unwrap();
        assert_eq!(t2, t);
        for (x, y) in a.iter().zip(&a2) {
            assert!((x - y).abs() <= 5e-7);
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(render(&toks(&["a"]), &[0.5, 0.5], &Labels::default(), Format::Svg).is_err());
    }

    #[test]
    fn terminal_marks_spans() {
        let t = toks(&["<ARG1>", "x", "</ARG1>", "<ARG2>", "y", "</ARG2>"]);
        let out = render_terminal(&t, &[0.0, 0.8, 0.0, 0.0, 0.2, 0.0], &Labels::default());
        assert!(out.contains("┌─ <ARG1>") && out.contains("└─ </ARG2>"));
        assert!(out.contains("███ 1.000 x"));
        assert!(out.contains("▃▃▃ 0.250 y"));
    }

    #[test]
    fn svg_is_well_formed() {
        let t = toks(&["<ARG1>", "<b>", "\"q\"", "</ARG1>", "<ARG2>", "&", "</ARG2>"]);
        let labels = Labels {
            gold: vec![SenseLabel::Causation, SenseLabel::Conjunction],
            predicted: Some(SenseLabel::Causation),
        };
        let svg = render_svg(&t, &[0.0, 0.5, 0.25, 0.0, 0.0, 0.25, 0.0], &labels);
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        let rects = doc.descendants().filter(|n| n.has_tag_name("rect")).count();
        let lines = doc.descendants().filter(|n| n.has_tag_name("line")).count();
        assert_eq!((rects, lines), (3, 4));
        let opacities: Vec<&str> = doc
            .descendants()
            .filter(|n| n.has_tag_name("rect"))
            .map(|n| n.attribute("fill-opacity").unwrap())
            .collect();
        assert_eq!(opacities, vec!["1.0000", "0.5000", "0.5000"]);
    }
}
