//! Bundled fixtures: a small film/people/music knowledge base, a retail
//! database built deterministically in code, and task files for both.

use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rusqlite::{params, Connection};

use crate::eval::{parse_db_tasks, parse_kb_tasks, DbTask, KbTask};
use crate::kb::{load_triples, TripleStore};

pub const KB_TRIPLES: &str = include_str!("kb.tsv");
pub const KB_TASKS: &str = include_str!("kb_tasks.jsonl");
pub const DB_TASKS: &str = include_str!("db_tasks.jsonl");

/// File names used by [`write_fixtures`].
pub const KB_TRIPLES_FILE: &str = "kb.tsv";
pub const KB_TASKS_FILE: &str = "kb_tasks.jsonl";
pub const DB_FILE: &str = "fixture.sqlite";
pub const DB_TASKS_FILE: &str = "db_tasks.jsonl";

pub fn kb_store() -> Arc<TripleStore> {
    Arc::new(load_triples(KB_TRIPLES.as_bytes()).expect("bundled triples parse"))
}

pub fn kb_tasks() -> Vec<KbTask> {
    parse_kb_tasks(KB_TASKS).expect("bundled KB tasks parse")
}

/// DB tasks refer to the database as [`DB_FILE`], relative to the task file.
pub fn db_tasks() -> Vec<DbTask> {
    parse_db_tasks(DB_TASKS).expect("bundled DB tasks parse")
}

const FIRST_NAMES: [&str; 20] = [
    "Ana", "Bruno", "Carla", "Diego", "Elena", "Felix", "Greta", "Hugo", "Ines", "Jonas", "Klara", "Luis", "Marta",
    "Nils", "Olga", "Pedro", "Rosa", "Stefan", "Teresa", "Victor",
];
const LAST_NAMES: [&str; 10] = [
    "Silva", "Garcia", "Martin", "Muller", "Rossi", "Novak", "Bauer", "Costa", "Moreau", "Weber",
];
const CITIES: [(&str, &str); 12] = [
    ("Lisbon", "Portugal"),
    ("Porto", "Portugal"),
    ("Madrid", "Spain"),
    ("Barcelona", "Spain"),
    ("Paris", "France"),
    ("Lyon", "France"),
    ("Berlin", "Germany"),
    ("Munich", "Germany"),
    ("Rome", "Italy"),
    ("Milan", "Italy"),
    ("Vienna", "Austria"),
    ("Prague", "Czech Republic"),
];
const SEGMENTS: [&str; 3] = ["SME", "LAM", "KAM"];
const MATERIALS: [&str; 5] = ["Oak", "Pine", "Steel", "Glass", "Brass"];
const ITEMS: [(&str, &str); 10] = [
    ("Chair", "furniture"),
    ("Table", "furniture"),
    ("Shelf", "furniture"),
    ("Lamp", "lighting"),
    ("Pendant", "lighting"),
    ("Sconce", "lighting"),
    ("Bowl", "kitchen"),
    ("Kettle", "kitchen"),
    ("Vase", "decor"),
    ("Mirror", "decor"),
];

pub const CUSTOMERS: i64 = 200;
pub const PRODUCTS: i64 = 50;
pub const ORDERS: i64 = 800;

fn date(year: i64, month: i64, day: i64) -> String {
    format!("{year:04}-{month:02}-{day:02}")
}

/// Creates the retail fixture database at `path`, replacing any existing file.
pub fn build_db(path: impl AsRef<Path>) -> rusqlite::Result<()> {
    let path = path.as_ref();
    if path.exists() {
        std::fs::remove_file(path).map_err(|e| rusqlite::Error::ToSqlConversionFailure(Box::new(e)))?;
    }
    let mut conn = Connection::open(path)?;
    conn.execute_batch(
        "CREATE TABLE customers (
            customer_id INTEGER PRIMARY KEY,
            name TEXT NOT NULL,
            city TEXT,
            country TEXT,
            segment TEXT,
            is_active TEXT,
            signup_date DATE
        );
        CREATE TABLE products (
            product_id INTEGER PRIMARY KEY,
            name TEXT NOT NULL,
            category TEXT,
            price REAL
        );
        CREATE TABLE orders (
            order_id INTEGER PRIMARY KEY,
            customer_id INTEGER REFERENCES customers(customer_id),
            product_id INTEGER REFERENCES products(product_id),
            quantity INTEGER,
            order_date DATE,
            status TEXT
        );",
    )?;
    let tx = conn.transaction()?;
    {
        let mut insert = tx.prepare("INSERT INTO customers VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)")?;
        for i in 1..=CUSTOMERS {
            let k = (i - 1) as usize;
            let name = format!("{} {}", FIRST_NAMES[k % 20], LAST_NAMES[k / 20]);
            let (city, country) = CITIES[(k * 7) % 12];
            let city = (i % 47 != 0).then_some(city);
            let active = if i % 4 == 0 { "F" } else { "T" };
            let signup = date(2018 + i % 3, 1 + (i * 7) % 12, 1 + (i * 11) % 28);
            insert.execute(params![i, name, city, country, SEGMENTS[(k * 5) % 3], active, signup])?;
        }

        let mut insert = tx.prepare("INSERT INTO products VALUES (?1, ?2, ?3, ?4)")?;
        for i in 1..=PRODUCTS {
            let k = (i - 1) as usize;
            let (item, category) = ITEMS[k % 10];
            let name = format!("{} {item}", MATERIALS[k / 10]);
            let base = 5 + (i * 37) % 95;
            let price = if i % 10 == 0 { base as f64 } else { base as f64 + 0.99 };
            insert.execute(params![i, name, category, price])?;
        }

        let mut insert = tx.prepare("INSERT INTO orders VALUES (?1, ?2, ?3, ?4, ?5, ?6)")?;
        for i in 1..=ORDERS {
            let status = match i % 10 {
                0 => "cancelled",
                1 | 2 => "pending",
                _ => "shipped",
            };
            insert.execute(params![
                i,
                1 + (i * 17) % CUSTOMERS,
                1 + (i * 29) % PRODUCTS,
                1 + (i * 3) % 5,
                date(2020 + i % 3, 1 + (i * 5) % 12, 1 + (i * 13) % 28),
                status
            ])?;
        }
    }
    tx.commit()
}

/// Writes the triples, both task files and the database into `dir`.
pub fn write_fixtures(dir: impl AsRef<Path>) -> io::Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, text) in [
        (KB_TRIPLES_FILE, KB_TRIPLES),
        (KB_TASKS_FILE, KB_TASKS),
        (DB_TASKS_FILE, DB_TASKS),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        written.push(path);
    }
    let db = dir.join(DB_FILE);
    build_db(&db).map_err(io::Error::other)?;
    written.push(db);
    Ok(written)
}
