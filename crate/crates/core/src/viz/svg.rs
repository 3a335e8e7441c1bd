use std::fmt::Write as _;
use std::path::Path;

use super::{CloudWeights, Distribution, NgramTable, VizError};
use crate::label::SentimentLabel;

pub enum Chart<'a> {
    Ngrams(&'a NgramTable),
    Distribution(&'a Distribution),
    Cloud(&'a CloudWeights),
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
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

const BAR_HEIGHT: f64 = 24.0;
const BAR_GAP: f64 = 8.0;
const LABEL_WIDTH: f64 = 180.0;
const PLOT_WIDTH: f64 = 400.0;

/// Horizontal bars, one `rect` per entry, in the given order.
fn bar_chart(title: &str, bars: &[(String, u64, &str)]) -> String {
    let max = bars.iter().map(|b| b.1).max().unwrap_or(1).max(1) as f64;
    let width = LABEL_WIDTH + PLOT_WIDTH + 80.0;
    let height = 40.0 + bars.len() as f64 * (BAR_HEIGHT + BAR_GAP);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" font-family="sans-serif" font-size="14">"#);
    let _ = writeln!(s, r#"<text x="10" y="22" font-weight="bold">{}</text>"#, escape(title));
    for (i, (label, count, color)) in bars.iter().enumerate() {
        let y = 36.0 + i as f64 * (BAR_HEIGHT + BAR_GAP);
        let w = (PLOT_WIDTH * *count as f64 / max * 100.0).round() / 100.0;
        let text_y = y + BAR_HEIGHT * 0.7;
        let _ = writeln!(s, r#"<text x="{}" y="{text_y}" text-anchor="end">{}</text>"#, LABEL_WIDTH - 8.0, escape(label));
        let _ = writeln!(s, r#"<rect x="{LABEL_WIDTH}" y="{y}" width="{w}" height="{BAR_HEIGHT}" fill="{color}"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="{text_y}">{count}</text>"#, LABEL_WIDTH + w + 6.0);
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_ngram_svg(table: &NgramTable) -> String {
    let bars: Vec<_> = table.entries.iter().map(|(g, c)| (g.join(" "), *c, "#4c72b0")).collect();
    bar_chart(&format!("Top {}-grams", table.n), &bars)
}

pub fn render_distribution_svg(dist: &Distribution) -> String {
    let color = |l: SentimentLabel| match l {
        SentimentLabel::Negative => "#c44e52",
        SentimentLabel::Neutral => "#8c8c8c",
        SentimentLabel::Positive => "#55a868",
    };
    let bars: Vec<_> = SentimentLabel::ALL.iter().map(|&l| (l.to_string(), dist.count(l), color(l))).collect();
    bar_chart("Sentiment distribution", &bars)
}

const MIN_FONT: f64 = 12.0;
const MAX_FONT: f64 = 48.0;

/// Rank-ordered rows of words; font size is affine in the count, so it is
/// monotone in the count.
pub fn render_cloud_svg(weights: &CloudWeights) -> String {
    let max = weights.entries.iter().map(|e| e.1).max().unwrap_or(1) as f64;
    let min = weights.entries.iter().map(|e| e.1).min().unwrap_or(1) as f64;
    let width = 800.0;
    let mut rows: Vec<String> = Vec::new();
    let (mut x, mut y, mut row_height) = (10.0, 0.0, 0.0f64);
    for (word, count) in &weights.entries {
        let size = if max > min { MIN_FONT + (MAX_FONT - MIN_FONT) * (*count as f64 - min) / (max - min) } else { MAX_FONT };
        let size = (size * 10.0).round() / 10.0;
        let advance = (size * 0.6 * word.chars().count() as f64 + size * 0.5).round();
        if x + advance > width && x > 10.0 {
            x = 10.0;
            y += row_height + 8.0;
            row_height = 0.0;
        }
        row_height = row_height.max(size);
        // Entries are ranked, so the first word of a row is its tallest.
        let baseline = y + row_height;
        rows.push(format!(r#"<text x="{x}" y="{baseline}" font-size="{size}" data-count="{count}">{}</text>"#, escape(word)));
        x += advance;
    }
    let height = y + row_height + 16.0;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" font-family="sans-serif">"#);
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the chart to `path`. Output depends only on the input.
pub fn render_svg(chart: Chart<'_>, path: impl AsRef<Path>) -> Result<(), VizError> {
    let svg = match chart {
        Chart::Ngrams(t) if !t.entries.is_empty() => render_ngram_svg(t),
        Chart::Distribution(d) if d.total() > 0 => render_distribution_svg(d),
        Chart::Cloud(w) if !w.entries.is_empty() => render_cloud_svg(w),
        _ => return Err(VizError::EmptyChart),
    };
    let path = path.as_ref();
    std::fs::write(path, svg).map_err(|source| VizError::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attr(tag: &str, name: &str) -> f64 {
        let start = tag.find(&format!(" {name}=\"")).unwrap() + name.len() + 3;
        tag[start..].split('"').next().unwrap().parse().unwrap()
    }

    #[test]
    fn distribution_has_three_bars() {
        let d = Distribution { negative: 5, neutral: 2, positive: 3 };
        let svg = render_distribution_svg(&d);
        assert_eq!(svg.matches("<rect").count(), 3);
        assert_eq!(svg, render_distribution_svg(&d));
        let widths: Vec<f64> = svg.lines().filter(|l| l.starts_with("<rect")).map(|l| attr(l, "width")).collect();
        assert_eq!(widths, [400.0, 160.0, 240.0]);
    }

    #[test]
    fn cloud_font_sizes_follow_counts() {
        let w = CloudWeights {
            entries: vec![("covid".into(), 40), ("ppkm".into(), 30), ("enggak".into(), 12), ("warga".into(), 12), ("<pasar>".into(), 3)],
        };
        let svg = render_cloud_svg(&w);
        let tags: Vec<&str> = svg.lines().filter(|l| l.starts_with("<text")).collect();
        assert_eq!(tags.len(), 5);
        let pairs: Vec<(f64, f64)> = tags.iter().map(|t| (attr(t, "data-count"), attr(t, "font-size"))).collect();
        for a in &pairs {
            for b in &pairs {
                if a.0 > b.0 {
                    assert!(a.1 > b.1, "{pairs:?}");
                } else if a.0 == b.0 {
                    assert_eq!(a.1, b.1);
                }
            }
        }
        assert!(svg.contains("&lt;pasar&gt;"));
    }

    #[test]
    fn render_writes_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let t = NgramTable { n: 1, entries: vec![(vec!["covid".into()], 2), (vec!["ppkm".into()], 1)] };
        let a = dir.path().join("a.svg");
        let b = dir.path().join("b.svg");
        render_svg(Chart::Ngrams(&t), &a).unwrap();
        render_svg(Chart::Ngrams(&t), &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let empty = NgramTable { n: 1, entries: vec![] };
        assert!(matches!(render_svg(Chart::Ngrams(&empty), &a), Err(VizError::EmptyChart)));
        assert!(matches!(render_svg(Chart::Ngrams(&t), dir.path().join("missing/x.svg")), Err(VizError::Io { .. })));
    }
}
