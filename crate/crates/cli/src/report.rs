//! Metric plots and per-cluster interval listings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use potminer::cluster::ClusterFile;
use potminer::eval::{majority_label, MetricsRow};
use potminer::partition::Indexing;
use potminer::pot::PotRecord;
use potminer::{Interval, Shot};

use crate::config::ReportConfig;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Purity and ARI against the cluster count, one polyline per metric.
pub fn render_svg(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let k_lo = rows.iter().map(|r| r.k).min().unwrap_or(0) as f64;
    let k_hi = rows.iter().map(|r| r.k).max().unwrap_or(0) as f64;
    let y_lo = rows.iter().map(|r| r.ari).fold(0.0f64, f64::min).max(-1.0);
    let x = |k: f64| {
        if k_hi > k_lo {
            MARGIN + (k - k_lo) / (k_hi - k_lo) * (WIDTH - 2.0 * MARGIN)
        } else {
            WIDTH / 2.0
        }
    };
    let y = |v: f64| HEIGHT - MARGIN - (v - y_lo) / (1.0 - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let _ = writeln!(
        out,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN,
    );
    for r in rows {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x(r.k as f64),
            HEIGHT - MARGIN + 16.0,
            r.k
        );
    }
    let mut tick = (y_lo * 4.0).ceil() / 4.0;
    while tick <= 1.0 + 1e-9 {
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" text-anchor="end">{tick:.2}</text><line x1="{m}" y1="{yy:.1}" x2="{r}" y2="{yy:.1}" stroke="#ddd"/>"##,
            MARGIN - 6.0,
            y(tick) + 4.0,
            m = MARGIN,
            r = WIDTH - MARGIN,
            yy = y(tick),
        );
        tick += 0.25;
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">clusters (k)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );

    type Series = (&'static str, &'static str, fn(&MetricsRow) -> f64);
    let series: [Series; 2] = [
        ("purity", "#1f77b4", |r| r.purity),
        ("ARI", "#d62728", |r| r.ari),
    ];
    for (i, (name, color, value)) in series.iter().enumerate() {
        let points: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.1},{:.1}", x(r.k as f64), y(value(r))))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        for r in rows {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                x(r.k as f64),
                y(value(r))
            );
        }
        let ly = MARGIN - 30.0 + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{a}" y1="{ly}" x2="{b}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{c}" y="{ty}">{name}</text>"#,
            a = WIDTH - MARGIN - 90.0,
            b = WIDTH - MARGIN - 70.0,
            c = WIDTH - MARGIN - 64.0,
            ty = ly + 4.0,
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Lists each cluster of the cut nearest `cfg.gallery_k` with its intervals
/// and, per interval, the highest-scoring PoTs with anchor and swing
/// coordinates over the PoT window.
pub fn gallery(
    shots: &[Shot],
    intervals: &[Interval],
    clusters: &ClusterFile,
    pots: &[PotRecord],
    indexing: Indexing,
    cfg: &ReportConfig,
) -> String {
    let mut out = String::new();
    let Some((k, assignment)) = clusters
        .cuts
        .iter()
        .min_by_key(|(k, _)| (k.abs_diff(cfg.gallery_k), *k))
    else {
        out.push_str("# no clustering available\n");
        return out;
    };
    let shot_by_id: BTreeMap<u64, &Shot> = shots.iter().map(|s| (s.shot_id, s)).collect();
    let mut pots_by_shot: BTreeMap<u64, Vec<&PotRecord>> = BTreeMap::new();
    for p in pots {
        pots_by_shot.entry(p.shot_id).or_default().push(p);
    }

    let _ = writeln!(out, "# k {k}");
    for cluster in 0..*k {
        let members: Vec<usize> = clusters
            .leaves
            .iter()
            .zip(assignment)
            .filter(|(_, &c)| c == cluster)
            .map(|(&u, _)| u)
            .collect();
        let _ = writeln!(out, "cluster {cluster} members {}", members.len());
        for u in members {
            let iv = &intervals[u];
            let shot = shot_by_id.get(&iv.shot_id);
            let label = shot
                .and_then(|s| s.frame_labels.as_ref())
                .and_then(|l| l.get(iv.range()))
                .and_then(majority_label)
                .map_or("-", String::as_str);
            let _ = writeln!(
                out,
                "  interval {u} shot {} frames {}..{} {} label {label}",
                iv.shot_id, iv.start, iv.end, iv.origin
            );
            let mut inside: Vec<&PotRecord> = pots_by_shot
                .get(&iv.shot_id)
                .into_iter()
                .flatten()
                .copied()
                .filter(|p| {
                    let window = p.descriptor.len().div_ceil(2);
                    match indexing {
                        Indexing::Start => iv.range().contains(&p.start_frame),
                        Indexing::Span => {
                            p.start_frame >= iv.start && p.start_frame + window <= iv.end
                        }
                    }
                })
                .collect();
            inside.sort_by(|a, b| {
                b.score
                    .total_cmp(&a.score)
                    .then(a.start_frame.cmp(&b.start_frame))
                    .then(a.anchor_id.cmp(&b.anchor_id))
                    .then(a.swing_id.cmp(&b.swing_id))
            });
            for p in inside.into_iter().take(cfg.pots_per_interval) {
                let _ = writeln!(
                    out,
                    "    pot frame {} anchor {} swing {} score {}",
                    p.start_frame, p.anchor_id, p.swing_id, p.score
                );
                let window = p.descriptor.len().div_ceil(2);
                for (role, id) in [("anchor", p.anchor_id), ("swing", p.swing_id)] {
                    let _ = write!(out, "      {role}");
                    if let Some(t) = shot.and_then(|s| s.trajectory(id)) {
                        for f in p.start_frame..p.start_frame + window {
                            if let Some(q) = t.position(f) {
                                let _ = write!(out, " {},{}", q.x, q.y);
                            }
                        }
                    }
                    out.push('\n');
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: usize, purity: f64, ari: f64) -> MetricsRow {
        MetricsRow {
            k,
            purity,
            ari,
            num_intervals: 10,
            uniformity: 0.9,
        }
    }

    #[test]
    fn sweep_gives_one_point_per_k_and_metric() {
        let rows: Vec<MetricsRow> = (12..=34).map(|k| row(k, 0.5, 0.2)).collect();
        let svg = render_svg(&rows);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 46);
        for line in svg.lines().filter(|l| l.starts_with("<polyline")) {
            let points = line.split("points=\"").nth(1).unwrap();
            assert_eq!(points.trim_end_matches("\"/>").split(' ').count(), 23);
        }
    }

    #[test]
    fn single_k_renders() {
        let svg = render_svg(&[row(5, 1.0, 1.0)]);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn clusters_without_members_are_listed() {
        use potminer::Dendrogram;
        let clusters = ClusterFile {
            dendrogram: Dendrogram {
                merges: vec![],
                leaf_count: 0,
            },
            leaves: vec![],
            unclustered: vec![],
            cuts: vec![(2, vec![])],
        };
        let text = gallery(
            &[],
            &[],
            &clusters,
            &[],
            Indexing::Start,
            &ReportConfig::default(),
        );
        assert!(text.contains("cluster 0 members 0"));
        assert!(text.contains("cluster 1 members 0"));
    }
}
