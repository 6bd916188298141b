import datetime as dt
import io

import pytest

from vulnscape import io as vio
from vulnscape.errors import (
    BadDate,
    BaselineWaveError,
    DuplicateKey,
    MissingColumn,
    NegativeAge,
    RangeViolation,
    UnknownVariable,
)
from vulnscape.model import EdiRecord, NeighborhoodId, dataset_from_edi
from vulnscape.synthetic import synthetic_edi

EDI_HEADER = ("neighborhood_id,neighborhood_name,wave,n_children,physical,social,"
              "emotional,language_cognitive,communication,one_or_more,two_or_more")


def edi_csv(*rows):
    return io.StringIO("\n".join([EDI_HEADER, *rows]) + "\n")


def test_load_edi_direct_parse():
    records = vio.load_edi(edi_csv("N01,North,6,250,12.5,10,9,8,11,30,15"))
    assert len(records) == 1
    rec = records[0]
    assert rec.physical == 12.5
    assert rec.wave == 6
    assert rec.neighborhood == NeighborhoodId("N01", "North")


def test_load_edi_ordering_invariant_rejected():
    # two_or_more must not exceed one_or_more
    with pytest.raises(RangeViolation) as err:
        vio.load_edi(edi_csv("N01,North,6,250,12.5,10,9,8,11,30,40"))
    assert err.value.field == "two_or_more"
    assert err.value.row == 2


def test_load_edi_24x5_gives_120_records(tmp_path):
    records, _ = synthetic_edi(0)
    path = tmp_path / "edi.csv"
    vio.write_edi(records, path)
    loaded = vio.load_edi(path)
    assert len(loaded) == 120
    assert len({r.neighborhood.id for r in loaded}) == 24
    assert sorted({r.wave for r in loaded}) == [2, 3, 4, 5, 6]


def test_load_edi_missing_column():
    bad = io.StringIO("neighborhood_id,wave\nN01,6\n")
    with pytest.raises(MissingColumn) as err:
        vio.load_edi(bad)
    assert "neighborhood_name" in err.value.columns


def test_load_edi_duplicate_key():
    with pytest.raises(DuplicateKey):
        vio.load_edi(edi_csv("N01,North,6,250,1,1,1,1,1,2,1",
                             "N01,North,6,250,2,2,2,2,2,3,2"))


def test_load_edi_wave_one_distinct_error():
    with pytest.raises(BaselineWaveError):
        vio.load_edi(edi_csv("N01,North,1,250,1,1,1,1,1,2,1"))


def test_load_edi_wave_out_of_range():
    with pytest.raises(RangeViolation):
        vio.load_edi(edi_csv("N01,North,9,250,1,1,1,1,1,2,1"))


def test_load_edi_out_of_range_percent_names_row_and_field():
    with pytest.raises(RangeViolation) as err:
        vio.load_edi(edi_csv("N01,North,6,250,1,1,1,1,1,2,1",
                             "N02,South,6,250,101,1,1,1,1,2,1"))
    assert err.value.field == "physical"
    assert err.value.row == 3


def test_edi_roundtrip_identity(tmp_path):
    records, _ = synthetic_edi(1)
    path = tmp_path / "edi.csv"
    vio.write_edi(records, path)
    first = path.read_bytes()
    reloaded = vio.load_edi(path)
    assert reloaded == records
    again = tmp_path / "again.csv"
    vio.write_edi(reloaded, again)
    assert again.read_bytes() == first


def test_dataset_validation_idempotent():
    records, _ = synthetic_edi(2)
    dataset = dataset_from_edi(records)
    dataset.validate()
    dataset.validate()  # re-runnable with no state change
    assert len(dataset.neighborhoods) == 24


# --- census -------------------------------------------------------------------

def test_catalog_147_variables(catalog):
    assert len(catalog) == 147
    assert len({v.var_id for v in catalog}) == 147
    categories = {v.category for v in catalog}
    assert categories == {"Geography", "EthnicOrigins", "LanguageImmigration",
                          "Income", "CostOfLiving", "Employment", "Occupation",
                          "Population"}


def test_census_empty_cell_is_missing_not_zero(tmp_path):
    catalog_csv = tmp_path / "catalog.csv"
    catalog_csv.write_text("var_id,label,category,kind\n"
                           "income_median,Income (Median),Income,median\n"
                           "population,Population,Geography,count\n")
    data_csv = tmp_path / "census.csv"
    data_csv.write_text("da_id,income_median,population\nD1,,100\nD2,50000,200\n")
    _, table = vio.load_census(data_csv, catalog_csv)
    assert "income_median" not in table.rows["D1"]
    assert table.rows["D2"]["income_median"] == 50000


def test_census_unknown_column(tmp_path):
    catalog_csv = tmp_path / "catalog.csv"
    catalog_csv.write_text("var_id,label,category,kind\npopulation,Population,Geography,count\n")
    data_csv = tmp_path / "census.csv"
    data_csv.write_text("da_id,population,mystery\nD1,100,5\n")
    with pytest.raises(UnknownVariable) as err:
        vio.load_census(data_csv, catalog_csv)
    assert err.value.column == "mystery"


def test_census_non_numeric_cell(tmp_path):
    catalog_csv = tmp_path / "catalog.csv"
    catalog_csv.write_text("var_id,label,category,kind\npopulation,Population,Geography,count\n")
    data_csv = tmp_path / "census.csv"
    data_csv.write_text("da_id,population\nD1,abc\n")
    from vulnscape.errors import KindMismatch
    with pytest.raises(KindMismatch):
        vio.load_census(data_csv, catalog_csv)


# --- registrations ---------------------------------------------------------------

REG_HEADER = ("client_id,birth_date,gender,neighborhood_id,account_created,"
              "registration_id,course_id,course_title,course_subtitle,season,"
              "registration_date,completed,max_registrants,subsidized")


def test_registrations_golden_three_rows():
    rows = [
        "C1,2004-03-02,female,N01,2006-01-15,R1,K10,Swim Lessons,Level 1,Winter,2009-01-20,true,12,false",
        "C1,2004-03-02,female,N01,2006-01-15,R2,K11,Spring Camp,Full day,Spring,2011-04-02,true,20,true",
        "C2,2006-11-30,m,,2008-06-01,R3,K12,Ballet Basics,Intro,Fall,2012-09-15,false,8,false",
    ]
    records = vio.load_registrations(io.StringIO("\n".join([REG_HEADER, *rows]) + "\n"))
    assert len(records) == 3
    assert records[0].client_id == "C1"
    assert records[0].birth_date == dt.date(2004, 3, 2)
    assert records[0].gender == "female"
    assert records[0].neighborhood == "N01"
    assert records[0].season == "Winter"
    assert records[0].completed is True
    assert records[0].max_registrants == 12
    assert records[0].subsidized is False
    assert records[1].subsidized is True
    assert records[2].gender == "male"          # normalized from "m"
    assert records[2].neighborhood is None      # empty -> unassigned
    assert records[2].completed is False


def test_registrations_roundtrip(registrations, tmp_path):
    path = tmp_path / "class.csv"
    vio.write_registrations(registrations, path)
    assert vio.load_registrations(path) == registrations
    second = tmp_path / "again.csv"
    vio.write_registrations(vio.load_registrations(path), second)
    assert second.read_bytes() == path.read_bytes()


def test_registration_before_birth_rejected():
    row = "C1,2010-01-01,female,N01,2006-01-15,R1,K10,Swim,L1,Winter,2009-01-20,true,12,false"
    with pytest.raises(NegativeAge):
        vio.load_registrations(io.StringIO("\n".join([REG_HEADER, row]) + "\n"))


def test_registration_bad_date():
    row = "C1,01/02/2004,female,N01,2006-01-15,R1,K10,Swim,L1,Winter,2009-01-20,true,12,false"
    with pytest.raises(BadDate):
        vio.load_registrations(io.StringIO("\n".join([REG_HEADER, row]) + "\n"))


def test_registration_unknown_gender_becomes_unspecified():
    row = "C1,2004-03-02,other,N01,2006-01-15,R1,K10,Swim,L1,Winter,2009-01-20,true,12,false"
    records = vio.load_registrations(io.StringIO("\n".join([REG_HEADER, row]) + "\n"))
    assert records[0].gender == "unspecified"


def test_edi_record_rejects_nonfinite():
    with pytest.raises(RangeViolation):
        EdiRecord(NeighborhoodId("N01", "North"), 6, 10,
                  float("nan"), 1, 1, 1, 1, 2, 1)
