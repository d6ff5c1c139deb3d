#pragma once

// SPDX-License-Identifier: Apache-2.0

// Built-in demonstration taxonomy: 2 domains x 3 topics x 3 subtypes x
// 3 behaviors = 54 leaf categories at depth 4. Used as the default tree by
// the CLI and as the standard fixture in tests. Ids are positional
// ("1", "1.2", "1.2.3", "1.2.3.1") so sibling order is obvious.

#include <string>
#include <vector>

#include "riskpath/taxonomy.hpp"

namespace riskpath {

namespace detail {

struct DemoLeaf {
  const char* name;
  const char* rule;
};

struct DemoSubtype {
  const char* name;
  const char* rule;
  DemoLeaf behaviors[3];
};

struct DemoTopic {
  const char* name;
  const char* rule;
  DemoSubtype subtypes[3];
};

struct DemoDomain {
  const char* name;
  const char* rule;
  DemoTopic topics[3];
};

inline const DemoDomain* demo_domains() {
  static const DemoDomain domains[2] = {
      {"Minor",
       "Content centered on individuals younger than eighteen.",
       {{"Inappropriate Behavior Involving Minors",
         "Minors shown modeling, implying, or glamorizing conduct that sets a negative "
         "example and invites imitation.",
         {{"Delinquent Social Atmosphere",
           "Minors imitating or joining adult social vices such as drinking, smoking, or "
           "nightlife, signaling premature maturity.",
           {{"Underage Drinking",
             "A minor consuming or holding alcohol, or placed in a clearly alcohol-centered "
             "setting such as a bar."},
            {"Underage Smoking",
             "A minor smoking, vaping, or handling tobacco or vaping products."},
            {"Nightclub Attendance",
             "A minor partying in bars, nightclubs, or comparable adult venues."}}},
          {"Dangerous Stunts",
           "Minors performing hazardous physical feats without protection or supervision.",
           {{"Rooftop Climbing", "A minor climbing roofs, ledges, or other high structures."},
            {"Traffic Stunts", "A minor performing tricks on or beside moving traffic."},
            {"Fire Play", "A minor igniting or manipulating fire as entertainment."}}},
          {"Academic Misconduct",
           "Minors showcasing or encouraging cheating and other dishonest school conduct.",
           {{"Exam Cheating", "Demonstrating or celebrating cheating during examinations."},
            {"Essay Ghostwriting", "Offering or requesting ghostwritten school work."},
            {"Grade Forgery", "Altering or fabricating academic records or report cards."}}}}},
        {"Vulgar Content Involving Minors",
         "Minors presented in vulgar, provocative, or indecent ways that distort aesthetic "
         "orientation or cause discomfort.",
         {{"Minor in Inappropriate Attire",
           "Minors wearing revealing clothing, exposing sensitive body areas, or styled in a "
           "sexually suggestive manner.",
           {{"Underwear Exposure",
             "A minor shown wearing only underwear, or with underwear accidentally exposed."},
            {"Swimwear Out of Context",
             "A minor in swimwear photographed away from any swimming setting."},
            {"Adultified Styling",
             "A minor styled with adult makeup and dress that sexualizes their appearance."}}},
          {"Suggestive Posing",
           "Minors directed into poses or motion that imitate adult sensuality.",
           {{"Provocative Dance", "A minor performing dance moves with sexualized framing."},
            {"Imitating Adult Intimacy", "Minors re-enacting romantic or intimate adult scenes."},
            {"Body-Focus Camera Work", "Camera work lingering on a minor's body parts."}}},
          {"Vulgar Language by Minors",
           "Minors delivering crude, profane, or sexually loaded speech as entertainment.",
           {{"Profanity Showcase", "A minor cursing for comedic or shock effect."},
            {"Sexual Innuendo", "A minor delivering sexually suggestive jokes or captions."},
            {"Crude Humor Trends", "A minor joining trends built on vulgar humor."}}}}},
        {"Minor Safety Risks",
         "Content exposing minors to physical, psychological, or privacy harm.",
         {{"Unsupervised Danger",
           "Minors left alone in hazardous situations ordinary care would prevent.",
           {{"Home Alone Hazards", "A young child handling dangerous household items alone."},
            {"Unsupervised Water Play", "A minor swimming or wading with no adult present."},
            {"Kitchen Hazards", "A young child using knives, stoves, or boiling liquids."}}},
          {"Privacy Exposure",
           "Content revealing information that lets strangers identify or locate a minor.",
           {{"School Identification Visible",
             "A minor's school name, uniform badge, or class roster legible on screen."},
            {"Home Address Disclosure", "A minor's home address or entrance shown or stated."},
            {"Real-Time Location Sharing", "Live or current whereabouts of a minor shared."}}},
          {"Harmful Challenges",
           "Minors attempting viral challenges with a real risk of injury.",
           {{"Choking Game", "A minor restricting breathing for a challenge or trend."},
            {"Extreme Diet Challenge", "A minor promoting starvation or extreme diet trends."},
            {"Sleep Deprivation Challenge",
             "A minor attempting prolonged sleep deprivation on camera."}}}}}}},
      {"Regulated Goods",
       "Content promoting, trading, or demonstrating goods restricted by law or platform "
       "policy.",
       {{"Alcohol and Tobacco Marketing",
         "Promotion or disguised sale of alcohol or tobacco products.",
         {{"Alcohol Promotion",
           "Content glamorizing alcohol consumption or steering viewers toward purchase.",
           {{"Binge Drinking Glorification", "Celebrating heavy or competitive drinking."},
            {"Alcohol Giveaway", "Offering alcohol as a prize, gift, or free sample."},
            {"Drinking Contest Promotion", "Organizing or advertising drinking contests."}}},
          {"Tobacco Promotion",
           "Content advertising tobacco or vaping products or normalizing their use.",
           {{"Cigarette Brand Placement", "Brand-forward display of cigarette products."},
            {"Vape Trick Tutorials", "Teaching vapor tricks in a product-promoting frame."},
            {"Tobacco Discount Codes", "Sharing discount or referral codes for tobacco."}}},
          {"Covert Sales Channels",
           "Workarounds that move restricted alcohol or tobacco sales off the record.",
           {{"Contact-Me Stock Hints", "Hinting at private stock with contact instructions."},
            {"Coded Price Lists", "Price lists using slang or emoji to evade review."},
            {"Off-Platform Redirects", "Steering buyers to external chats for the deal."}}}}},
        {"Weapons and Hazardous Items",
         "Display, trade, or instruction around weapons and dangerous materials.",
         {{"Bladed Weapons",
           "Combat-oriented knives and blades presented outside lawful utility context.",
           {{"Combat Knife Showcase", "Displaying combat knives as weapons for sale or show."},
            {"Concealed Blade Accessories", "Everyday items hiding a usable blade."},
            {"Blade Sharpening for Harm", "Preparing blades while signaling intent to harm."}}},
          {"Explosives and Pyrotechnics",
           "Explosive devices, modifications, or resale beyond consumer fireworks.",
           {{"Firework Modification", "Altering consumer fireworks to boost their charge."},
            {"Homemade Explosive Hints", "Partial recipes or sourcing hints for explosives."},
            {"Commercial-Grade Resale", "Offering display-grade pyrotechnics to individuals."}}},
          {"Imitation Firearms",
           "Realistic replicas and conversions that can pass for live firearms.",
           {{"Realistic Replica Display", "Showcasing replicas indistinguishable from firearms."},
            {"Blank-Fire Conversion", "Converting blank-fire props toward live function."},
            {"Unmarked Airsoft", "Airsoft hardware with legal markings removed."}}}}},
        {"Counterfeit and Gray Market",
         "Counterfeit goods, forged credentials, and gray-market resale.",
         {{"Counterfeit Luxury",
           "Imitation luxury goods passed off or sold as brand items.",
           {{"Replica Handbag Sales", "Selling counterfeit designer bags."},
            {"Fake Watch Listings", "Listings for counterfeit branded watches."},
            {"Logo-Swap Services", "Services that rebrand generic goods with luxury logos."}}},
          {"Forged Documents",
           "Production or sale of forged identity or credential documents.",
           {{"Fake ID Offers", "Offering forged government identification."},
            {"Diploma Mill Ads", "Advertising purchasable degrees or transcripts."},
            {"Ticket Forgery", "Producing or selling counterfeit event tickets."}}},
          {"Gray Market Electronics",
           "Electronics moved outside authorized channels or with provenance concerns.",
           {{"Region-Lock Removal Sales", "Selling devices with region locks stripped."},
            {"Warranty-Stripped Resale", "Reselling units with serials or warranties voided."},
            {"Stolen Goods Hints", "Suspiciously sourced devices offered far below value."}}}}}}}};
  return domains;
}

}  // namespace detail

/// The standard 54-leaf demonstration tree (depth 4).
inline Taxonomy demo_taxonomy() {
  Taxonomy t;
  t.depth = 4;
  const detail::DemoDomain* domains = detail::demo_domains();
  for (int d = 0; d < 2; ++d) {
    const auto& dom = domains[d];
    std::string did = std::to_string(d + 1);
    t.nodes.push_back({did, dom.name, 1, dom.rule, std::nullopt, {}});
    for (int ti = 0; ti < 3; ++ti) {
      const auto& top = dom.topics[ti];
      std::string tid = did + "." + std::to_string(ti + 1);
      t.nodes.push_back({tid, top.name, 2, top.rule, did, {}});
      for (int si = 0; si < 3; ++si) {
        const auto& sub = top.subtypes[si];
        std::string sid = tid + "." + std::to_string(si + 1);
        t.nodes.push_back({sid, sub.name, 3, sub.rule, tid, {}});
        for (int bi = 0; bi < 3; ++bi) {
          const auto& beh = sub.behaviors[bi];
          std::string bid = sid + "." + std::to_string(bi + 1);
          t.nodes.push_back({bid, beh.name, 4, beh.rule, sid, {}});
        }
      }
    }
  }
  t.reindex();
  return t;
}

}  // namespace riskpath
